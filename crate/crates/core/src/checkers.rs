//! Necessary-condition tests and envelope-equality tests for BV- and
//! BD-ellipticity.
//!
//! Every test first runs a fixed list of canonical probes (coordinate
//! vectors, angle grids), then `samples` seeded random inputs. Inputs are
//! evaluated in parallel; the reported witness is the first violation in
//! probe-then-sample order, so reports are deterministic in the seed.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::constructions::{self, Construction, ConstructionError, Family};
use crate::density::{Density, DensityError};
use crate::envelope::{self, AtomDictionary, Decomposition, EnvelopeError, Mode};
use crate::fields;
use crate::linalg;
use crate::sampling;
use crate::tolerances::{CHECK_REL_TOL, ENVELOPE_MARGIN, QUAD_TOL, REFINE_RESIDUAL_REL};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Subadd,
    EtaConvex,
    BdSym,
    Bv,
    Bd,
    Constructions,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Subadd => "subadd",
            TestKind::EtaConvex => "eta-convex",
            TestKind::BdSym => "bd-sym",
            TestKind::Bv => "bv",
            TestKind::Bd => "bd",
            TestKind::Constructions => "constructions",
        }
    }

    pub fn parse(s: &str) -> Option<TestKind> {
        [
            TestKind::Subadd,
            TestKind::EtaConvex,
            TestKind::BdSym,
            TestKind::Bv,
            TestKind::Bd,
            TestKind::Constructions,
        ]
        .into_iter()
        .find(|t| t.name() == s)
    }
}

/// How a construction's competitor energy was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySource {
    /// Jump energy of the realized field.
    Field,
    /// Closed form that bounds the field energy from above.
    ClosedForm,
}

/// Inputs and values that witness a violated inequality. Each variant can
/// be re-evaluated from scratch with [`recheck`].
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `f(λ + ξ, η) > f(λ, η) + f(ξ, η)`.
    Subadditivity {
        lambda: Vec<f64>,
        xi: Vec<f64>,
        eta: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },
    /// `f̄(λ, η₁ + η₂) > f̄(λ, η₁) + f̄(λ, η₂)`.
    EtaConvexity {
        lambda: Vec<f64>,
        eta1: Vec<f64>,
        eta2: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },
    /// `f̄(λ, η) ≠ f̄(η, λ)`.
    BdSymmetry {
        lambda: Vec<f64>,
        eta: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },
    /// A rank-one decomposition of `λ ⊗ η` (or `λ ⊙ η`) cheaper than `f(λ, η)`.
    Envelope {
        symmetric: bool,
        lambda: Vec<f64>,
        eta: Vec<f64>,
        f_value: f64,
        envelope: f64,
        gap: f64,
        decomposition: Decomposition,
    },
    /// A competitor whose energy is below the flat jump.
    Construction {
        construction: Construction,
        k: usize,
        energy: f64,
        reference: f64,
        source: EnergySource,
    },
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Violated { witness: Witness },
    Consistent { max_residual: f64, statement: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub test: TestKind,
    pub verdict: Verdict,
    /// Deterministic probes evaluated before the random samples.
    pub probes: usize,
    pub samples: usize,
    pub seed: u64,
    pub rel_tol: f64,
    pub message: String,
}

impl CheckReport {
    pub fn violated(&self) -> bool {
        matches!(self.verdict, Verdict::Violated { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.verdict {
            Verdict::Violated { witness } => Some(witness),
            Verdict::Consistent { .. } => None,
        }
    }
}

fn consistent_statement(n: usize) -> String {
    format!("consistent up to tolerance at {n} samples")
}

/// Outcome of one evaluated input: a normalized residual (positive means
/// violated) and, if violated, the witness.
struct Outcome {
    residual: f64,
    witness: Option<Witness>,
}

fn assemble(
    test: TestKind,
    outcomes: Vec<Outcome>,
    probes: usize,
    samples: usize,
    seed: u64,
    rel_tol: f64,
) -> CheckReport {
    let total = outcomes.len();
    let mut max_residual = f64::NEG_INFINITY;
    let mut first = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        max_residual = max_residual.max(o.residual);
        if first.is_none() {
            if let Some(w) = o.witness {
                first = Some((i, w));
            }
        }
    }
    let (verdict, message) = match first {
        Some((i, witness)) => {
            let origin = if i < probes {
                format!("probe {i}")
            } else {
                format!("sample {}", i - probes)
            };
            (
                Verdict::Violated { witness },
                format!("{}: violated at {origin}", test.name()),
            )
        }
        None => {
            let statement = consistent_statement(total);
            (
                Verdict::Consistent {
                    max_residual: if total == 0 { 0.0 } else { max_residual },
                    statement: statement.clone(),
                },
                format!("{}: {statement}", test.name()),
            )
        }
    };
    CheckReport {
        test,
        verdict,
        probes,
        samples,
        seed,
        rel_tol,
        message,
    }
}

fn basis(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn scale_of(vals: &[f64]) -> f64 {
    vals.iter().fold(1.0, |a, v| a.max(v.abs()))
}

fn angle(th: f64) -> Vec<f64> {
    vec![th.cos(), th.sin()]
}

fn ready(d: &Density) -> Result<(), CheckError> {
    d.ensure_total()?;
    Ok(())
}

fn subadd_outcome(d: &Density, lambda: &[f64], xi: &[f64], eta: &[f64]) -> Outcome {
    let lhs = d.value(&linalg::add(lambda, xi), eta);
    let a = d.value(lambda, eta);
    let b = d.value(xi, eta);
    let rhs = a + b;
    let scale = scale_of(&[lhs, a, b]);
    let residual = (lhs - rhs) / scale;
    Outcome {
        residual,
        witness: (residual > CHECK_REL_TOL).then(|| Witness::Subadditivity {
            lambda: lambda.to_vec(),
            xi: xi.to_vec(),
            eta: eta.to_vec(),
            lhs,
            rhs,
        }),
    }
}

/// `f(λ + ξ, η) ≤ f(λ, η) + f(ξ, η)`.
pub fn check_subadditivity(d: &Density, samples: usize, seed: u64) -> Result<CheckReport, CheckError> {
    ready(d)?;
    let n = d.dimension;
    let mut probes: Vec<[Vec<f64>; 3]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                probes.push([basis(n, i), basis(n, j), basis(n, k)]);
                probes.push([basis(n, i), linalg::scale(&basis(n, j), -1.0), basis(n, k)]);
            }
        }
    }
    if n == 2 {
        for a in 0..8 {
            for b in 0..8 {
                for c in 0..4 {
                    let t = std::f64::consts::PI / 8.0;
                    probes.push([angle(a as f64 * t), angle(b as f64 * t), angle(c as f64 * 2.0 * t)]);
                }
            }
        }
    }
    let np = probes.len();
    let inputs: Vec<[Vec<f64>; 3]> = probes
        .into_iter()
        .chain((0..samples).map(|i| {
            let mut r = sampling::substream(seed, i as u64);
            let l = sampling::jump_vector(&mut r, n);
            let x = sampling::jump_vector(&mut r, n);
            let e = sampling::unit_sphere(&mut r, n);
            [l, x, e]
        }))
        .collect();
    let out = inputs
        .par_iter()
        .map(|[l, x, e]| subadd_outcome(d, l, x, e))
        .collect();
    Ok(assemble(TestKind::Subadd, out, np, samples, seed, CHECK_REL_TOL))
}

fn eta_convex_outcome(d: &Density, lambda: &[f64], eta1: &[f64], eta2: &[f64]) -> Outcome {
    let lhs = d.bar(lambda, &linalg::add(eta1, eta2));
    let a = d.bar(lambda, eta1);
    let b = d.bar(lambda, eta2);
    let rhs = a + b;
    let scale = scale_of(&[lhs, a, b]);
    let residual = (lhs - rhs) / scale;
    Outcome {
        residual,
        witness: (residual > CHECK_REL_TOL).then(|| Witness::EtaConvexity {
            lambda: lambda.to_vec(),
            eta1: eta1.to_vec(),
            eta2: eta2.to_vec(),
            lhs,
            rhs,
        }),
    }
}

/// Convexity of `f̄(λ, ·)`: `f̄(λ, η₁ + η₂) ≤ f̄(λ, η₁) + f̄(λ, η₂)`.
pub fn check_eta_convexity(d: &Density, samples: usize, seed: u64) -> Result<CheckReport, CheckError> {
    ready(d)?;
    let n = d.dimension;
    let mut probes: Vec<[Vec<f64>; 3]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                probes.push([basis(n, i), basis(n, j), basis(n, k)]);
            }
        }
    }
    if n == 2 {
        let steps = 24;
        let t = std::f64::consts::TAU / steps as f64;
        for a in 0..steps {
            for b in 1..steps / 2 {
                for l in [0.0, 0.5 * std::f64::consts::PI] {
                    probes.push([angle(l), angle(a as f64 * t), angle((a + b) as f64 * t)]);
                }
            }
        }
    }
    let np = probes.len();
    let inputs: Vec<[Vec<f64>; 3]> = probes
        .into_iter()
        .chain((0..samples).map(|i| {
            let mut r = sampling::substream(seed, i as u64);
            let l = sampling::jump_vector(&mut r, n);
            let r1 = sampling::log_uniform(&mut r, 1e-1, 1e1);
            let e1 = linalg::scale(&sampling::unit_sphere(&mut r, n), r1);
            let r2 = sampling::log_uniform(&mut r, 1e-1, 1e1);
            let e2 = linalg::scale(&sampling::unit_sphere(&mut r, n), r2);
            [l, e1, e2]
        }))
        .collect();
    let out = inputs
        .par_iter()
        .map(|[l, a, b]| eta_convex_outcome(d, l, a, b))
        .collect();
    Ok(assemble(TestKind::EtaConvex, out, np, samples, seed, CHECK_REL_TOL))
}

fn bd_sym_outcome(d: &Density, lambda: &[f64], eta: &[f64]) -> Outcome {
    let lhs = d.bar(lambda, eta);
    let rhs = d.bar(eta, lambda);
    let scale = scale_of(&[lhs, rhs]);
    let residual = (lhs - rhs).abs() / scale;
    Outcome {
        residual,
        witness: (residual > CHECK_REL_TOL).then(|| Witness::BdSymmetry {
            lambda: lambda.to_vec(),
            eta: eta.to_vec(),
            lhs,
            rhs,
        }),
    }
}

/// `f̄(λ, η) = f̄(η, λ)`, necessary for BD-ellipticity.
pub fn check_bd_symmetry(d: &Density, samples: usize, seed: u64) -> Result<CheckReport, CheckError> {
    ready(d)?;
    let n = d.dimension;
    let mut probes: Vec<[Vec<f64>; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            probes.push([basis(n, i), basis(n, j)]);
        }
    }
    let np = probes.len();
    let inputs: Vec<[Vec<f64>; 2]> = probes
        .into_iter()
        .chain((0..samples).map(|i| {
            let mut r = sampling::substream(seed, i as u64);
            let l = sampling::jump_vector(&mut r, n);
            let e = sampling::unit_sphere(&mut r, n);
            [l, e]
        }))
        .collect();
    let out = inputs
        .par_iter()
        .map(|[l, e]| bd_sym_outcome(d, l, e))
        .collect();
    Ok(assemble(TestKind::BdSym, out, np, samples, seed, CHECK_REL_TOL))
}

fn envelope_inputs(n: usize, samples: usize, seed: u64) -> (usize, Vec<[Vec<f64>; 2]>) {
    let mut probes: Vec<[Vec<f64>; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            probes.push([basis(n, i), basis(n, j)]);
        }
    }
    let np = probes.len();
    let inputs = probes
        .into_iter()
        .chain((0..samples).map(|i| {
            let mut r = sampling::substream(seed, i as u64);
            let l = sampling::jump_vector(&mut r, n);
            let e = sampling::unit_sphere(&mut r, n);
            [l, e]
        }))
        .collect();
    (np, inputs)
}

/// Margin an envelope value must beat `f` by before it counts.
fn envelope_margin(gap: f64, scale: f64) -> f64 {
    gap.max(0.0) + ENVELOPE_MARGIN * scale
}

fn envelope_outcome(
    d: &Density,
    lambda: &[f64],
    eta: &[f64],
    dict: &AtomDictionary,
    iters: usize,
    symmetric: bool,
) -> Result<Outcome, EnvelopeError> {
    let f = d.value(lambda, eta);
    let res = if symmetric {
        envelope::bd_envelope(d, lambda, eta, dict, iters)?
    } else {
        envelope::bv_envelope(d, lambda, eta, dict, iters)?
    };
    let scale = scale_of(&[f, res.value]);
    let margin = envelope_margin(res.gap, scale);
    let residual = (f - res.value - margin) / scale + ENVELOPE_MARGIN;
    let exact = res.decomposition.residual
        <= REFINE_RESIDUAL_REL * res.decomposition.target.norm().max(1e-300);
    let witness = (res.value < f - margin && exact).then(|| Witness::Envelope {
        symmetric,
        lambda: lambda.to_vec(),
        eta: eta.to_vec(),
        f_value: f,
        envelope: res.value,
        gap: res.gap,
        decomposition: res.decomposition.clone(),
    });
    Ok(Outcome { residual, witness })
}

fn envelope_check(
    test: TestKind,
    d: &Density,
    samples: usize,
    dict: &AtomDictionary,
    iters: usize,
    seed: u64,
) -> Result<CheckReport, CheckError> {
    let (np, inputs) = envelope_inputs(d.dimension, samples, seed);
    let symmetric = test == TestKind::Bd;
    let out = inputs
        .par_iter()
        .map(|[l, e]| envelope_outcome(d, l, e, dict, iters, symmetric))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(test, out, np, samples, seed, ENVELOPE_MARGIN))
}

/// `f(λ, η) = Φ_f(λ ⊗ η)`: a cheaper rank-one decomposition of `λ ⊗ η`
/// certifies that `f` is not BV-elliptic.
pub fn check_bv_ellipticity(
    d: &Density,
    samples: usize,
    dict: &AtomDictionary,
    iters: usize,
    seed: u64,
) -> Result<CheckReport, CheckError> {
    ready(d)?;
    envelope_check(TestKind::Bv, d, samples, dict, iters, seed)
}

/// The symmetric analogue at `λ ⊙ η`, preceded by the BD-symmetry filter.
pub fn check_bd_ellipticity(
    d: &Density,
    samples: usize,
    dict: &AtomDictionary,
    iters: usize,
    seed: u64,
) -> Result<CheckReport, CheckError> {
    ready(d)?;
    let sym = check_bd_symmetry(d, samples, seed)?;
    if let Verdict::Violated { witness } = sym.verdict {
        return Ok(CheckReport {
            test: TestKind::Bd,
            verdict: Verdict::Violated { witness },
            message: format!("bd: violated at the symmetry filter ({})", sym.message),
            ..sym
        });
    }
    envelope_check(TestKind::Bd, d, samples, dict, iters, seed)
}

/// Fields with more cells than this are not built by the checker.
pub const FIELD_CELL_CAP: usize = 5_000;

/// Competitor energy of `c` at `k`: the field energy when the field is
/// affordable, otherwise the closed form that bounds it from above.
pub fn competitor_energy(
    d: &Density,
    c: &Construction,
    with_fields: bool,
) -> Result<(f64, EnergySource), CheckError> {
    if with_fields && c.field_cells_estimate() <= FIELD_CELL_CAP {
        match c.field() {
            Ok(field) => {
                let e = fields::total_energy(d, &field, QUAD_TOL)
                    .map_err(|e| CheckError::Unsupported(e.to_string()))?;
                return Ok((e.total * c.field_scale(), EnergySource::Field));
            }
            Err(ConstructionError::Unrealizable(_)) | Err(ConstructionError::FieldDimension) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok((c.valid_bound_at(d, c.k), EnergySource::ClosedForm))
}

fn construction_outcome(
    d: &Density,
    c: &Construction,
    with_fields: bool,
) -> Result<Outcome, CheckError> {
    let reference = c.reference(d);
    let (energy, source) = competitor_energy(d, c, with_fields)?;
    let scale = scale_of(&[reference, energy]);
    let residual = (reference - energy) / scale;
    Ok(Outcome {
        residual,
        witness: (residual > CHECK_REL_TOL).then(|| Witness::Construction {
            construction: c.clone(),
            k: c.k,
            energy,
            reference,
            source,
        }),
    })
}

/// `f(λ, η) ≤ energy` for every construction at every `k`. Pairs whose `k`
/// is inadmissible for the family (odd `k` for the symmetry triangles) or
/// whose geometry does not fit are skipped.
pub fn check_construction_bounds(
    d: &Density,
    list: &[Construction],
    ks: &[usize],
    with_fields: bool,
) -> Result<CheckReport, CheckError> {
    ready(d)?;
    let mut items = Vec::new();
    for c in list {
        if matches!(c.family, Family::SingleJump { .. }) {
            items.push(c.clone());
            continue;
        }
        for &k in ks {
            if let Ok(ck) = c.with_k(k) {
                items.push(ck);
            }
        }
    }
    let out = items
        .par_iter()
        .map(|c| construction_outcome(d, c, with_fields))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(
        TestKind::Constructions,
        out,
        0,
        items.len(),
        0,
        CHECK_REL_TOL,
    ))
}

/// Seeded competitors for `d`: canonical coordinate cases followed by
/// `samples` random draws of every family available in dimension `n`.
/// Parameters are chosen so every family is constructible (the `k` is a
/// placeholder and is replaced by the caller's list).
pub fn generated_constructions(d: &Density, samples: usize, seed: u64) -> Vec<Construction> {
    let n = d.dimension;
    let k = 4;
    let mut list = Vec::new();
    let mut push = |r: Result<Construction, ConstructionError>| {
        if let Ok(c) = r {
            list.push(c);
        }
    };
    let e = |i| basis(n, i);
    if n == 2 {
        push(constructions::single_jump(&e(1), &e(0)));
        push(constructions::subadditivity_strip(&e(1), &e(0), &e(0), k));
        push(constructions::eta_convexity_triangles(&e(1), &e(0), &e(1), k));
        push(constructions::symmetry_triangles(&e(1), &e(0), k));
        push(constructions::symmetry_triangles(&e(0), &e(1), k));
        let atoms = constructions::symmetrized_atoms(&e(1), &e(0));
        push(constructions::silhavy_lattice(&e(1), &e(0), &atoms, k));
    }
    for i in 0..samples {
        let mut r = sampling::substream(seed, i as u64);
        let lambda = sampling::jump_vector(&mut r, n);
        let eta = sampling::unit_sphere(&mut r, n);
        let xi = sampling::jump_vector(&mut r, n);
        push(constructions::single_jump(&lambda, &eta));
        push(constructions::subadditivity_strip(&lambda, &xi, &eta, k));
        if n == 2 {
            let r1 = sampling::log_uniform(&mut r, 1e-1, 1e1);
            let r2 = sampling::log_uniform(&mut r, 1e-1, 1e1);
            let eta1 = linalg::scale(&sampling::unit_sphere(&mut r, n), r1);
            let eta2 = linalg::scale(&sampling::unit_sphere(&mut r, n), r2);
            push(constructions::eta_convexity_triangles(&lambda, &eta1, &eta2, k));
            if let Some(unit) = linalg::normalized(&lambda) {
                push(constructions::symmetry_triangles(&unit, &eta, k));
            }
            let atoms = constructions::symmetrized_atoms(&lambda, &eta);
            push(constructions::silhavy_lattice(&lambda, &eta, &atoms, k));
        }
    }
    list
}

/// Recomputes a witness from its inputs and reports whether it still
/// violates the inequality it claims to violate.
pub fn recheck(d: &Density, w: &Witness) -> bool {
    match w {
        Witness::Subadditivity { lambda, xi, eta, .. } => {
            subadd_outcome(d, lambda, xi, eta).witness.is_some()
        }
        Witness::EtaConvexity {
            lambda, eta1, eta2, ..
        } => eta_convex_outcome(d, lambda, eta1, eta2).witness.is_some(),
        Witness::BdSymmetry { lambda, eta, .. } => bd_sym_outcome(d, lambda, eta).witness.is_some(),
        Witness::Envelope {
            symmetric,
            lambda,
            eta,
            gap,
            decomposition,
            ..
        } => {
            let target = if *symmetric {
                linalg::sym_outer(lambda, eta)
            } else {
                linalg::outer(lambda, eta)
            };
            let mode = if *symmetric { Mode::Symmetric } else { Mode::Full };
            let rebuilt = envelope::decomposition(&target, decomposition.terms.clone());
            let residual = rebuilt.residual_in(mode);
            let cost = rebuilt.cost(d);
            let f = d.value(lambda, eta);
            let scale = scale_of(&[f, cost]);
            residual <= REFINE_RESIDUAL_REL * target.norm().max(1e-300)
                && cost < f - envelope_margin(*gap, scale)
        }
        Witness::Construction {
            construction, k, source, ..
        } => {
            let Ok(c) = construction.with_k(*k) else {
                return false;
            };
            let with_fields = *source == EnergySource::Field;
            construction_outcome(d, &c, with_fields)
                .map(|o| o.witness.is_some())
                .unwrap_or(false)
        }
    }
}

/// Runs one named test with shared settings.
pub struct CheckSettings<'a> {
    pub samples: usize,
    pub seed: u64,
    pub dict: Option<&'a AtomDictionary>,
    pub refine_iters: usize,
    pub ks: Vec<usize>,
}

pub fn run_check(d: &Density, test: TestKind, s: &CheckSettings) -> Result<CheckReport, CheckError> {
    let dict = || {
        s.dict
            .ok_or_else(|| CheckError::Unsupported("an atom dictionary is required".into()))
    };
    match test {
        TestKind::Subadd => check_subadditivity(d, s.samples, s.seed),
        TestKind::EtaConvex => check_eta_convexity(d, s.samples, s.seed),
        TestKind::BdSym => check_bd_symmetry(d, s.samples, s.seed),
        TestKind::Bv => check_bv_ellipticity(d, s.samples, dict()?, s.refine_iters, s.seed),
        TestKind::Bd => check_bd_ellipticity(d, s.samples, dict()?, s.refine_iters, s.seed),
        TestKind::Constructions => {
            let list = generated_constructions(d, s.samples, s.seed);
            let mut rep = check_construction_bounds(d, &list, &s.ks, true)?;
            rep.seed = s.seed;
            Ok(rep)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{SphereFn, Table};

    #[test]
    fn frobenius_consistent() {
        let d = Density::frobenius(2);
        for r in [
            check_subadditivity(&d, 200, 3).unwrap(),
            check_eta_convexity(&d, 200, 3).unwrap(),
            check_bd_symmetry(&d, 200, 3).unwrap(),
        ] {
            assert!(!r.violated(), "{}", r.message);
            assert!(r.message.contains("consistent up to tolerance at"));
        }
    }

    #[test]
    fn aniso_symmetry_witness() {
        let d = Density::weighted_aniso(vec![1.0, 3.0]);
        for seed in [0, 1, 99] {
            let r = check_bd_symmetry(&d, 50, seed).unwrap();
            match r.witness() {
                Some(Witness::BdSymmetry {
                    lambda,
                    eta,
                    lhs,
                    rhs,
                }) => {
                    assert_eq!((lambda.as_slice(), eta.as_slice()), (&[1.0, 0.0][..], &[0.0, 1.0][..]));
                    assert_eq!((*lhs, *rhs), (1.0, 3.0));
                }
                other => panic!("{other:?}"),
            }
            assert!(recheck(&d, r.witness().unwrap()));
        }
    }

    #[test]
    fn nonsubadditive_table() {
        // h = 1 on the axes and 5 on the diagonals:
        // f(e₁ + e₂, η) = 5√2 > f(e₁, η) + f(e₂, η) = 2.
        let th: Vec<f64> = (0..8).map(|i| i as f64 * std::f64::consts::FRAC_PI_4).collect();
        let row = |v: f64| vec![v; 1];
        let values: Vec<Vec<f64>> = (0..8)
            .map(|i| row(if i % 2 == 1 { 5.0 } else { 1.0 }))
            .collect();
        let d = Density::tabulated(Table {
            lambda_angles: th,
            eta_angles: vec![0.0],
            values,
            periodic: true,
        })
        .unwrap();
        let r = check_subadditivity(&d, 20, 0).unwrap();
        assert!(r.violated());
        assert!(recheck(&d, r.witness().unwrap()));
    }

    #[test]
    fn nonconvex_sphere_function() {
        let g = SphereFn::Fourier {
            a0: 1.0,
            cos: vec![0.0, 0.0, 0.0, 0.5],
            sin: vec![],
        };
        let d = Density::product_norm(2, g, 2.0);
        let r = check_eta_convexity(&d, 50, 0).unwrap();
        assert!(r.violated());
        assert!(recheck(&d, r.witness().unwrap()));
    }

    #[test]
    fn aniso_symmetry_triangles_beat_flat_jump() {
        let d = Density::weighted_aniso(vec![1.0, 3.0]);
        let c = constructions::symmetry_triangles(&[0.0, 1.0], &[1.0, 0.0], 4).unwrap();
        let r = check_construction_bounds(&d, &[c], &[64], false).unwrap();
        assert!(r.violated());
        assert!(recheck(&d, r.witness().unwrap()));
    }

    #[test]
    fn bd_filter_precedes_envelope() {
        let d = Density::weighted_aniso(vec![1.0, 3.0]);
        let dict = envelope::sample_dictionary(&d, 8, 0).unwrap();
        let r = check_bd_ellipticity(&d, 5, &dict, 0, 0).unwrap();
        assert!(matches!(r.witness(), Some(Witness::BdSymmetry { .. })));
    }
}
