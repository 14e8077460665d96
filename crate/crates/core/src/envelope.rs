//! The rank-one envelope `Φ_f(F) = inf Σ f(λᵢ, ηᵢ)` over `Σ λᵢ ⊗ ηᵢ = F`,
//! computed as a linear program over a finite dictionary of unit atoms,
//! followed by local refinement of the active atoms.
//!
//! Every atom `(μ, η)` of a dictionary contributes two LP columns, `+μ ⊗ η`
//! with cost `f(μ, η)` and `−μ ⊗ η` with cost `f(−μ, η)`; evenness makes
//! `(μ, η)` and `(−μ, −η)` the same atom, so this covers every signed pair.
//!
//! The LP value is an upper bound for `Φ_f`. The dual matrix `Y` satisfies
//! `Y : (μ ⊗ η) ≤ f(μ, η)` on the atoms it was computed against, so `Y : F`
//! bounds the envelope from below only relative to that atom set.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::density::{Density, DensityError};
use crate::linalg::{self, Matrix};
use crate::lp::{self, LpError, LpOptions, LpProblem};
use crate::tolerances::{
    FD_STEP, LP_TOL, PENALTY_GROWTH, PENALTY_INIT, REFINE_RESIDUAL_REL, REFINE_ROUNDS, SYM_TOL,
};

/// Smallest accepted dictionary resolution.
pub const MIN_RESOLUTION: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("dimension mismatch: density has n = {density}, input has n = {input}")]
    Dimension { density: usize, input: usize },
    #[error("resolution must be ≥ {MIN_RESOLUTION}, got {0}")]
    Resolution(usize),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("target is not in the conic hull of the dictionary atoms")]
    Infeasible,
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Clone, Debug, Serialize)]
pub struct Atom {
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    /// `f(μ, η)`.
    pub value: f64,
    /// `f(−μ, η)`.
    pub value_neg: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomDictionary {
    pub dimension: usize,
    pub resolution: usize,
    pub seed: u64,
    pub atoms: Vec<Atom>,
}

/// First nonzero component positive.
fn fold_hemisphere(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(i) = v.iter().position(|x| x.abs() > 1e-12) {
        if v[i] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `count` directions on the half sphere: the coordinate axes, then Halton
/// points of the cube kept inside the unit ball and projected outwards.
fn sphere_points(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut idx = 1 + seed % 100_000;
    while pts.len() < count {
        let v: Vec<f64> = (0..n)
            .map(|k| 2.0 * radical_inverse(idx, PRIMES[k % PRIMES.len()]) - 1.0)
            .collect();
        idx += 1;
        let r = linalg::norm(&v);
        if r > 1e-3 && r <= 1.0 {
            let u = fold_hemisphere(linalg::scale(&v, 1.0 / r));
            if pts
                .iter()
                .all(|p| linalg::norm(&linalg::sub(p, &u)) > 1e-12)
            {
                pts.push(u);
            }
        }
    }
    pts.truncate(count.max(n));
    pts
}

/// Samples the atom dictionary. For n = 2, `μ` and `η` each take
/// `resolution` equally spaced angles in `[0, π)`; for n ≥ 3 both run over
/// `resolution` low-discrepancy points of the half sphere (axes first).
pub fn sample_dictionary(
    d: &Density,
    resolution: usize,
    seed: u64,
) -> Result<AtomDictionary, EnvelopeError> {
    if resolution < MIN_RESOLUTION {
        return Err(EnvelopeError::Resolution(resolution));
    }
    d.ensure_total()?;
    let n = d.dimension;
    let dirs: Vec<Vec<f64>> = if n == 2 {
        (0..resolution)
            .map(|i| {
                let t = PI * i as f64 / resolution as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else if n == 1 {
        vec![vec![1.0]]
    } else {
        sphere_points(n, resolution, seed)
    };
    let mut atoms = Vec::with_capacity(dirs.len() * dirs.len());
    for mu in &dirs {
        let neg = linalg::scale(mu, -1.0);
        for eta in &dirs {
            atoms.push(Atom {
                mu: mu.clone(),
                eta: eta.clone(),
                value: d.value(mu, eta),
                value_neg: d.value(&neg, eta),
            });
        }
    }
    Ok(AtomDictionary {
        dimension: n,
        resolution,
        seed,
        atoms,
    })
}

/// Which linear image of `μ ⊗ η` is constrained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// All `n²` entries of `Σ c μ ⊗ η`.
    Full,
    /// The `n(n+1)/2` upper entries of `Σ c sym(μ ⊗ η)`.
    Symmetric,
}

impl Mode {
    pub fn rows(self, n: usize) -> usize {
        match self {
            Mode::Full => n * n,
            Mode::Symmetric => n * (n + 1) / 2,
        }
    }

    fn atom_vec(self, mu: &[f64], eta: &[f64], out: &mut [f64]) {
        let n = mu.len();
        match self {
            Mode::Full => {
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = mu[i] * eta[j];
                    }
                }
            }
            Mode::Symmetric => {
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        out[k] = 0.5 * (mu[i] * eta[j] + mu[j] * eta[i]);
                        k += 1;
                    }
                }
            }
        }
    }

    fn target_vec(self, f: &Matrix) -> Vec<f64> {
        let n = f.nrows();
        match self {
            Mode::Full => (0..n * n).map(|k| f[(k / n, k % n)]).collect(),
            Mode::Symmetric => {
                let mut v = vec![];
                for i in 0..n {
                    for j in i..n {
                        v.push(0.5 * (f[(i, j)] + f[(j, i)]));
                    }
                }
                v
            }
        }
    }

    /// Certificate matrix `Y` with `Y : (μ ⊗ η) = yᵀ atom_vec(μ, η)`.
    fn dual_matrix(self, y: &[f64], n: usize) -> Matrix {
        match self {
            Mode::Full => Matrix::from_fn(n, n, |i, j| y[i * n + j]),
            Mode::Symmetric => {
                let mut m = Matrix::zeros(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i..n {
                        if i == j {
                            m[(i, i)] = y[k];
                        } else {
                            m[(i, j)] = 0.5 * y[k];
                            m[(j, i)] = 0.5 * y[k];
                        }
                        k += 1;
                    }
                }
                m
            }
        }
    }

    /// The constrained image of `Σ c μ ⊗ η` as a matrix.
    fn image(self, m: &Matrix) -> Matrix {
        match self {
            Mode::Full => m.clone(),
            Mode::Symmetric => linalg::sym(m),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub c: f64,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub terms: Vec<Term>,
    #[serde(serialize_with = "ser_matrix")]
    pub target: Matrix,
    /// Frobenius norm of the constraint residual.
    pub residual: f64,
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
    linalg::to_rows(m).serialize(s)
}

impl Decomposition {
    /// `Σ c f(μ, η)`.
    pub fn cost(&self, d: &Density) -> f64 {
        self.terms.iter().map(|t| t.c * d.value(&t.mu, &t.eta)).sum()
    }

    /// `Σ c μ ⊗ η`.
    pub fn sum(&self, n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for t in &self.terms {
            m += linalg::outer(&t.mu, &t.eta) * t.c;
        }
        m
    }

    pub fn residual_in(&self, mode: Mode) -> f64 {
        let n = self.target.nrows();
        (mode.image(&self.sum(n)) - mode.image(&self.target)).norm()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DualCertificate {
    #[serde(serialize_with = "ser_matrix")]
    pub y: Matrix,
    /// `min (f(μ, η) − Y : μ ⊗ η)` over the signed atoms of the LP.
    pub slack_min: f64,
    pub symmetric: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeResult {
    /// Upper bound: cost of the returned decomposition.
    pub value: f64,
    /// `Y : F`, a lower bound relative to the atom set only.
    pub lower_bound: f64,
    pub certificate: DualCertificate,
    pub decomposition: Decomposition,
    /// `value − Y : F`.
    pub gap: f64,
    pub mode: Mode,
    /// Number of signed LP columns the certificate was checked against.
    pub columns: usize,
    /// Canonical atoms had to be added to reach feasibility.
    pub augmented: bool,
    /// Refinement could not improve the LP decomposition.
    pub stalled: bool,
    pub lp_iterations: usize,
}

/// A signed column `(μ, η, cost)`.
struct Column {
    mu: Vec<f64>,
    eta: Vec<f64>,
    cost: f64,
}

fn dictionary_columns(dict: &AtomDictionary) -> Vec<Column> {
    let mut cols = Vec::with_capacity(2 * dict.atoms.len());
    for a in &dict.atoms {
        cols.push(Column {
            mu: a.mu.clone(),
            eta: a.eta.clone(),
            cost: a.value,
        });
        cols.push(Column {
            mu: linalg::scale(&a.mu, -1.0),
            eta: a.eta.clone(),
            cost: a.value_neg,
        });
    }
    cols
}

fn signed_columns(d: &Density, atoms: &[(Vec<f64>, Vec<f64>)]) -> Vec<Column> {
    let mut cols = vec![];
    for (mu, eta) in atoms {
        let neg = linalg::scale(mu, -1.0);
        cols.push(Column {
            cost: d.value(mu, eta),
            mu: mu.clone(),
            eta: eta.clone(),
        });
        cols.push(Column {
            cost: d.value(&neg, eta),
            mu: neg,
            eta: eta.clone(),
        });
    }
    cols
}

fn canonical_columns(d: &Density) -> Vec<Column> {
    let n = d.dimension;
    let mut cols = vec![];
    for i in 0..n {
        for j in 0..n {
            for s in [1.0, -1.0] {
                let mut mu = vec![0.0; n];
                mu[i] = s;
                let mut eta = vec![0.0; n];
                eta[j] = 1.0;
                let cost = d.value(&mu, &eta);
                cols.push(Column { mu, eta, cost });
            }
        }
    }
    cols
}

fn check_dims(d: &Density, f: &Matrix) -> Result<(), EnvelopeError> {
    if f.nrows() != d.dimension || f.ncols() != d.dimension {
        return Err(EnvelopeError::Dimension {
            density: d.dimension,
            input: f.nrows(),
        });
    }
    Ok(())
}

fn build_problem(cols: &[Column], mode: Mode, target: &Matrix) -> LpProblem {
    let n = target.nrows();
    let m = mode.rows(n);
    let mut a = vec![0.0; m * cols.len()];
    for (k, c) in cols.iter().enumerate() {
        mode.atom_vec(&c.mu, &c.eta, &mut a[k * m..(k + 1) * m]);
    }
    LpProblem {
        m,
        a,
        c: cols.iter().map(|c| c.cost).collect(),
        b: mode.target_vec(target),
    }
}

/// Solves the LP over `cols`, adding canonical atoms on infeasibility.
fn solve_columns(
    d: &Density,
    mut cols: Vec<Column>,
    mode: Mode,
    target: &Matrix,
    warm: Option<&[usize]>,
) -> Result<EnvelopeResult, EnvelopeError> {
    let n = target.nrows();
    let opts = LpOptions::default();
    let mut augmented = false;
    let sol = match lp::solve(&build_problem(&cols, mode, target), warm, &opts) {
        Ok(s) => s,
        Err(LpError::Infeasible(_)) => {
            cols.extend(canonical_columns(d));
            augmented = true;
            match lp::solve(&build_problem(&cols, mode, target), None, &opts) {
                Ok(s) => s,
                Err(LpError::Infeasible(_)) => return Err(EnvelopeError::Infeasible),
                Err(e) => return Err(e.into()),
            }
        }
        Err(e) => return Err(e.into()),
    };
    let terms: Vec<Term> = sol
        .x
        .iter()
        .map(|&(j, c)| Term {
            c,
            mu: cols[j].mu.clone(),
            eta: cols[j].eta.clone(),
        })
        .collect();
    let mut dec = Decomposition {
        terms,
        target: target.clone(),
        residual: 0.0,
    };
    dec.residual = dec.residual_in(mode);
    let y = mode.dual_matrix(&sol.duals, n);
    let lower = linalg::frob_dot(&y, &mode.image(target));
    let value = dec.cost(d);
    Ok(EnvelopeResult {
        value,
        lower_bound: lower,
        gap: value - lower,
        certificate: DualCertificate {
            y,
            slack_min: sol.min_reduced_cost,
            symmetric: mode == Mode::Symmetric,
        },
        decomposition: dec,
        mode,
        columns: cols.len(),
        augmented,
        stalled: false,
        lp_iterations: sol.iterations,
    })
}

/// LP envelope at `F` over `dict` (n² equality constraints).
pub fn envelope_lp(
    d: &Density,
    f: &Matrix,
    dict: &AtomDictionary,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_dims(d, f)?;
    if dict.dimension != d.dimension {
        return Err(EnvelopeError::Dimension {
            density: d.dimension,
            input: dict.dimension,
        });
    }
    solve_columns(d, dictionary_columns(dict), Mode::Full, f, None)
}

/// LP envelope with constraints on the symmetric part only.
pub fn envelope_symmetric(
    d: &Density,
    g: &Matrix,
    dict: &AtomDictionary,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_dims(d, g)?;
    if !linalg::is_symmetric(g, SYM_TOL) {
        return Err(EnvelopeError::NotSymmetric);
    }
    if dict.dimension != d.dimension {
        return Err(EnvelopeError::Dimension {
            density: d.dimension,
            input: dict.dimension,
        });
    }
    solve_columns(d, dictionary_columns(dict), Mode::Symmetric, g, None)
}

/// Outcome of [`refine_decomposition`].
#[derive(Clone, Debug)]
pub struct Refined {
    pub decomposition: Decomposition,
    pub stalled: bool,
}

/// Local refinement of a feasible decomposition of `F` (full constraints).
pub fn refine_decomposition(
    d: &Density,
    f: &Matrix,
    init: &Decomposition,
    iters: usize,
) -> Result<Refined, EnvelopeError> {
    refine_mode(d, f, init, iters, Mode::Full)
}

/// Local refinement for the symmetric constraint `Σ c sym(μ ⊗ η) = G`.
pub fn refine_symmetric(
    d: &Density,
    g: &Matrix,
    init: &Decomposition,
    iters: usize,
) -> Result<Refined, EnvelopeError> {
    refine_mode(d, g, init, iters, Mode::Symmetric)
}

#[derive(Clone)]
struct Params {
    c: Vec<f64>,
    mu: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
}

impl Params {
    fn residual(&self, mode: Mode, target: &Matrix) -> Matrix {
        let n = target.nrows();
        let mut m = Matrix::zeros(n, n);
        for k in 0..self.c.len() {
            m += linalg::outer(&self.mu[k], &self.eta[k]) * self.c[k];
        }
        mode.image(&m) - mode.image(target)
    }

    fn objective(&self, d: &Density, mode: Mode, target: &Matrix, penalty: f64) -> f64 {
        let cost: f64 = (0..self.c.len())
            .map(|k| self.c[k] * d.value(&self.mu[k], &self.eta[k]))
            .sum();
        let r = self.residual(mode, target);
        cost + penalty * r.norm_squared()
    }
}

/// Ambient-space gradient of `f(·, η)` at `μ` by central differences.
fn fd_grad(h: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + FD_STEP;
        let up = h(&y);
        y[i] = x[i] - FD_STEP;
        let dn = h(&y);
        y[i] = x[i];
        g[i] = (up - dn) / (2.0 * FD_STEP);
    }
    g
}

fn tangent(g: &[f64], x: &[f64]) -> Vec<f64> {
    let r = linalg::dot(g, x);
    g.iter().zip(x).map(|(g, x)| g - r * x).collect()
}

fn gradient(p: &Params, d: &Density, mode: Mode, target: &Matrix, penalty: f64) -> Params {
    let r = p.residual(mode, target);
    let mut g = p.clone();
    for k in 0..p.c.len() {
        let (mu, eta, c) = (&p.mu[k], &p.eta[k], p.c[k]);
        let rm: Vec<f64> = (0..mu.len())
            .map(|i| (0..eta.len()).map(|j| r[(i, j)] * eta[j]).sum())
            .collect();
        let rtm: Vec<f64> = (0..eta.len())
            .map(|j| (0..mu.len()).map(|i| r[(i, j)] * mu[i]).sum())
            .collect();
        g.c[k] = d.value(mu, eta) + 2.0 * penalty * linalg::dot(mu, &rm);
        let gm = fd_grad(&|x: &[f64]| d.value(x, eta), mu);
        let ge = fd_grad(
            &|x: &[f64]| {
                let u = linalg::normalized(x).unwrap_or_else(|| eta.clone());
                d.value(mu, &u)
            },
            eta,
        );
        g.mu[k] = tangent(
            &gm.iter()
                .zip(&rm)
                .map(|(a, b)| c * a + 2.0 * penalty * c * b)
                .collect::<Vec<_>>(),
            mu,
        );
        g.eta[k] = tangent(
            &ge.iter()
                .zip(&rtm)
                .map(|(a, b)| c * a + 2.0 * penalty * c * b)
                .collect::<Vec<_>>(),
            eta,
        );
    }
    g
}

fn step(p: &Params, g: &Params, s: f64) -> Params {
    let mut q = p.clone();
    for k in 0..p.c.len() {
        q.c[k] = (p.c[k] - s * g.c[k]).max(0.0);
        let mu = linalg::sub(&p.mu[k], &linalg::scale(&g.mu[k], s));
        let eta = linalg::sub(&p.eta[k], &linalg::scale(&g.eta[k], s));
        q.mu[k] = linalg::normalized(&mu).unwrap_or_else(|| p.mu[k].clone());
        q.eta[k] = linalg::normalized(&eta).unwrap_or_else(|| p.eta[k].clone());
    }
    q
}

fn descend(
    p: &mut Params,
    d: &Density,
    mode: Mode,
    target: &Matrix,
    penalty: f64,
    iters: usize,
) {
    let mut s = 1e-2 / penalty.max(1.0).sqrt();
    let mut val = p.objective(d, mode, target, penalty);
    for _ in 0..iters {
        let g = gradient(p, d, mode, target, penalty);
        let gn2: f64 = g.c.iter().map(|x| x * x).sum::<f64>()
            + g.mu.iter().flatten().map(|x| x * x).sum::<f64>()
            + g.eta.iter().flatten().map(|x| x * x).sum::<f64>();
        if gn2 == 0.0 || !gn2.is_finite() {
            break;
        }
        let mut accepted = false;
        while s > 1e-16 {
            let q = step(p, &g, s);
            let v = q.objective(d, mode, target, penalty);
            if v < val - 1e-4 * s * gn2 {
                *p = q;
                val = v;
                s *= 2.0;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
}

/// Nonnegative least-squares correction of the weights on fixed atoms
/// (projected Gauss–Newton on the active set).
fn least_squares_weights(p: &mut Params, mode: Mode, target: &Matrix) {
    let n = target.nrows();
    let m = mode.rows(n);
    let tv = mode.target_vec(target);
    for _ in 0..10 {
        let active: Vec<usize> = (0..p.c.len()).filter(|&k| p.c[k] > 0.0).collect();
        if active.is_empty() {
            return;
        }
        let cols: Vec<Vec<f64>> = active
            .iter()
            .map(|&k| {
                let mut v = vec![0.0; m];
                mode.atom_vec(&p.mu[k], &p.eta[k], &mut v);
                v
            })
            .collect();
        let na = active.len();
        let mut ata = vec![0.0; na * na];
        let mut atb = vec![0.0; na];
        for a in 0..na {
            for b in 0..na {
                ata[a * na + b] = linalg::dot(&cols[a], &cols[b]);
            }
            atb[a] = linalg::dot(&cols[a], &tv);
            ata[a * na + a] += 1e-14;
        }
        let Some(c) = linalg::solve_dense(&ata, &atb, na, 1e-15) else {
            return;
        };
        let mut clipped = false;
        for (i, &k) in active.iter().enumerate() {
            p.c[k] = c[i].max(0.0);
            clipped |= c[i] < 0.0;
        }
        if !clipped {
            return;
        }
    }
}

fn refine_mode(
    d: &Density,
    target: &Matrix,
    init: &Decomposition,
    iters: usize,
    mode: Mode,
) -> Result<Refined, EnvelopeError> {
    check_dims(d, target)?;
    let fnorm = target.norm();
    let tol = REFINE_RESIDUAL_REL * fnorm.max(1.0);
    let init_cost = init.cost(d);
    if init.terms.is_empty() {
        return Ok(Refined {
            decomposition: init.clone(),
            stalled: true,
        });
    }
    let mut p = Params {
        c: init.terms.iter().map(|t| t.c).collect(),
        mu: init.terms.iter().map(|t| t.mu.clone()).collect(),
        eta: init.terms.iter().map(|t| t.eta.clone()).collect(),
    };
    let mut penalty = PENALTY_INIT * fnorm.max(f64::MIN_POSITIVE);
    for _ in 0..REFINE_ROUNDS {
        descend(&mut p, d, mode, target, penalty, iters);
        penalty *= PENALTY_GROWTH;
    }
    // Exact weights on the moved atoms together with the initial ones, so the
    // result can never cost more than the input.
    let mut cols: Vec<Column> = vec![];
    for k in 0..p.c.len() {
        cols.push(Column {
            cost: d.value(&p.mu[k], &p.eta[k]),
            mu: p.mu[k].clone(),
            eta: p.eta[k].clone(),
        });
    }
    for t in &init.terms {
        cols.push(Column {
            cost: d.value(&t.mu, &t.eta),
            mu: t.mu.clone(),
            eta: t.eta.clone(),
        });
    }
    let warm: Vec<usize> = (p.c.len()..cols.len()).collect();
    let prob = build_problem(&cols, mode, target);
    let mut out = match lp::solve(&prob, Some(&warm), &LpOptions::default()) {
        Ok(sol) => Decomposition {
            terms: sol
                .x
                .iter()
                .map(|&(j, c)| Term {
                    c,
                    mu: cols[j].mu.clone(),
                    eta: cols[j].eta.clone(),
                })
                .collect(),
            target: target.clone(),
            residual: 0.0,
        },
        Err(_) => init.clone(),
    };
    out.residual = out.residual_in(mode);
    if out.residual > tol {
        let mut q = Params {
            c: out.terms.iter().map(|t| t.c).collect(),
            mu: out.terms.iter().map(|t| t.mu.clone()).collect(),
            eta: out.terms.iter().map(|t| t.eta.clone()).collect(),
        };
        least_squares_weights(&mut q, mode, target);
        for (t, c) in out.terms.iter_mut().zip(&q.c) {
            t.c = *c;
        }
        out.terms.retain(|t| t.c > 0.0);
        out.residual = out.residual_in(mode);
    }
    let new_cost = out.cost(d);
    if new_cost > init_cost || out.residual > tol.max(init.residual) {
        let mut keep = init.clone();
        keep.residual = keep.residual_in(mode);
        return Ok(Refined {
            decomposition: keep,
            stalled: true,
        });
    }
    let stalled = new_cost >= init_cost - 1e-14 * init_cost.abs().max(1.0);
    Ok(Refined {
        decomposition: out,
        stalled,
    })
}

fn envelope_refined(
    d: &Density,
    target: &Matrix,
    dict: &AtomDictionary,
    iters: usize,
    mode: Mode,
    extra: &[(Vec<f64>, Vec<f64>)],
) -> Result<EnvelopeResult, EnvelopeError> {
    check_dims(d, target)?;
    if dict.dimension != d.dimension {
        return Err(EnvelopeError::Dimension {
            density: d.dimension,
            input: dict.dimension,
        });
    }
    let mut cols = dictionary_columns(dict);
    cols.extend(signed_columns(d, extra));
    let base = solve_columns(d, cols, mode, target, None)?;
    if iters == 0 || base.decomposition.terms.is_empty() {
        return Ok(base);
    }
    let refined = refine_mode(d, target, &base.decomposition, iters, mode)?;
    if refined.stalled {
        let mut r = base;
        r.stalled = true;
        return Ok(r);
    }
    // Re-solve over the dictionary plus the refined atoms, warm-started at
    // the refined decomposition, so the certificate covers the atoms used.
    let mut cols = dictionary_columns(dict);
    cols.extend(signed_columns(d, extra));
    let first = cols.len();
    for t in &refined.decomposition.terms {
        cols.push(Column {
            cost: d.value(&t.mu, &t.eta),
            mu: t.mu.clone(),
            eta: t.eta.clone(),
        });
    }
    let warm: Vec<usize> = (first..cols.len()).collect();
    let mut res = solve_columns(d, cols, mode, target, Some(&warm))?;
    res.lp_iterations += base.lp_iterations;
    if res.value > base.value + LP_TOL * base.value.abs().max(1.0) {
        let mut r = base;
        r.stalled = true;
        return Ok(r);
    }
    Ok(res)
}

/// Refined envelope at an arbitrary matrix (full constraints).
pub fn envelope_refined_full(
    d: &Density,
    f: &Matrix,
    dict: &AtomDictionary,
    iters: usize,
) -> Result<EnvelopeResult, EnvelopeError> {
    envelope_refined(d, f, dict, iters, Mode::Full, &[])
}

/// Refined symmetric envelope at a symmetric matrix.
pub fn envelope_refined_symmetric(
    d: &Density,
    g: &Matrix,
    dict: &AtomDictionary,
    iters: usize,
) -> Result<EnvelopeResult, EnvelopeError> {
    if !linalg::is_symmetric(g, SYM_TOL) {
        return Err(EnvelopeError::NotSymmetric);
    }
    envelope_refined(d, g, dict, iters, Mode::Symmetric, &[])
}

fn check_pair(d: &Density, lambda: &[f64], eta: &[f64]) -> Result<(), EnvelopeError> {
    d.eval(lambda, eta)?;
    Ok(())
}

/// `Φ_f(λ ⊗ η)`: the BV-elliptic envelope at `(λ, η)`.
pub fn bv_envelope(
    d: &Density,
    lambda: &[f64],
    eta: &[f64],
    dict: &AtomDictionary,
    iters: usize,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_pair(d, lambda, eta)?;
    let extra: Vec<_> = linalg::normalized(lambda)
        .map(|l| vec![(l, eta.to_vec())])
        .unwrap_or_default();
    envelope_refined(d, &linalg::outer(lambda, eta), dict, iters, Mode::Full, &extra)
}

/// `Φ_f(λ ⊙ η)` under symmetric constraints: the BD-elliptic envelope.
pub fn bd_envelope(
    d: &Density,
    lambda: &[f64],
    eta: &[f64],
    dict: &AtomDictionary,
    iters: usize,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_pair(d, lambda, eta)?;
    let extra: Vec<_> = linalg::normalized(lambda)
        .map(|l| vec![(l.clone(), eta.to_vec()), (eta.to_vec(), l)])
        .unwrap_or_default();
    envelope_refined(d, &linalg::sym_outer(lambda, eta), dict, iters, Mode::Symmetric, &extra)
}

/// Decomposition from explicit terms (residual computed for full constraints).
pub fn decomposition(target: &Matrix, terms: Vec<Term>) -> Decomposition {
    let mut dec = Decomposition {
        terms,
        target: target.clone(),
        residual: 0.0,
    };
    dec.residual = dec.residual_in(Mode::Full);
    dec
}

/// Envelope over an explicit list of atoms `(μ, η)` (both signs of each).
pub fn envelope_over_atoms(
    d: &Density,
    target: &Matrix,
    atoms: &[(Vec<f64>, Vec<f64>)],
    mode: Mode,
) -> Result<EnvelopeResult, EnvelopeError> {
    check_dims(d, target)?;
    let cols = signed_columns(d, atoms);
    solve_columns(d, cols, mode, target, None)
}
