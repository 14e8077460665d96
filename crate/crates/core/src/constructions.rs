//! Competitor families with closed-form energies in `k`, their limits as
//! `k → ∞`, and realizable partition fields in two dimensions.
//!
//! Conventions shared by all families: `Q_η` is the unit square centred at
//! the origin with `η` as its "vertical" axis, `ζ = R η` with
//! `R = [[0, −1], [1, 0]]`, and fields are built in the local frame
//! (`η ↦ e₂`) and mapped to world coordinates by `T = [[η₂, η₁], [−η₁, η₂]]`.

use serde::Serialize;
use thiserror::Error;

use crate::density::Density;
use crate::fields::{self, FieldError, PartitionField, RigidCell};
use crate::geometry::{self, Point};
use crate::linalg;
use crate::tolerances::{DECOMPOSITION_TOL, UNIT_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("k = {k}: {reason}")]
    InvalidK { k: usize, reason: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{0} must be a unit vector")]
    NotUnit(&'static str),
    #[error("η₁ + η₂ = 0")]
    ZeroSum,
    #[error("η₁ and η₂ point in opposite directions; no triangle exists")]
    OppositeCollinear,
    #[error("λ = ±η: nothing to construct")]
    Parallel,
    #[error("atoms do not decompose λ ⊙ η (residual {0:e})")]
    Decomposition(f64),
    #[error("geometry does not fit in Q_η: {0}")]
    Unrealizable(String),
    #[error("fields are two-dimensional only")]
    FieldDimension,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Whether the closed form is the exact field energy or an upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Exact,
    Upper,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    SingleJump {
        lambda: Vec<f64>,
        eta: Vec<f64>,
    },
    SubadditivityStrip {
        lambda: Vec<f64>,
        xi: Vec<f64>,
        eta: Vec<f64>,
    },
    EtaConvexityTriangles {
        lambda: Vec<f64>,
        eta1: Vec<f64>,
        eta2: Vec<f64>,
    },
    SymmetryTriangles {
        lambda: Vec<f64>,
        eta: Vec<f64>,
    },
    SilhavyLattice {
        lambda: Vec<f64>,
        eta: Vec<f64>,
        atoms: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct Construction {
    #[serde(flatten)]
    pub family: Family,
    pub k: usize,
}

fn unit(v: &[f64], what: &'static str) -> Result<(), ConstructionError> {
    if (linalg::norm(v) - 1.0).abs() > UNIT_TOL {
        return Err(ConstructionError::NotUnit(what));
    }
    Ok(())
}

fn same_dim(a: &[f64], b: &[f64]) -> Result<(), ConstructionError> {
    if a.len() != b.len() {
        return Err(ConstructionError::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn check_k(k: usize) -> Result<(), ConstructionError> {
    if k <= 2 {
        return Err(ConstructionError::InvalidK {
            k,
            reason: "k must exceed 2",
        });
    }
    Ok(())
}

fn arr(v: &[f64]) -> [f64; 2] {
    [v[0], v[1]]
}

fn rot(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

fn neg(v: &[f64]) -> Vec<f64> {
    linalg::scale(v, -1.0)
}

/// Orthonormal basis of `η^⊥` (Gram–Schmidt on the coordinate axes).
pub fn orthogonal_complement(eta: &[f64]) -> Vec<Vec<f64>> {
    let n = eta.len();
    if n == 2 {
        return vec![vec![-eta[1], eta[0]]];
    }
    let mut basis: Vec<Vec<f64>> = vec![eta.to_vec()];
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for b in &basis {
            let c = linalg::dot(&v, b);
            v = linalg::sub(&v, &linalg::scale(b, c));
        }
        if let Some(u) = linalg::normalized(&v) {
            if linalg::norm(&v) > 1e-8 {
                basis.push(u);
            }
        }
        if basis.len() == n {
            break;
        }
    }
    basis.split_off(1)
}

/// The elementary jump `u_{λ,η}` with constant energy `f(λ, η)`.
pub fn single_jump(lambda: &[f64], eta: &[f64]) -> Result<Construction, ConstructionError> {
    same_dim(lambda, eta)?;
    unit(eta, "η")?;
    Ok(Construction {
        family: Family::SingleJump {
            lambda: lambda.to_vec(),
            eta: eta.to_vec(),
        },
        k: 0,
    })
}

/// A thin rectangle above the midline carrying `λ − ξ`.
pub fn subadditivity_strip(
    lambda: &[f64],
    xi: &[f64],
    eta: &[f64],
    k: usize,
) -> Result<Construction, ConstructionError> {
    same_dim(lambda, eta)?;
    same_dim(xi, eta)?;
    unit(eta, "η")?;
    check_k(k)?;
    Ok(Construction {
        family: Family::SubadditivityStrip {
            lambda: lambda.to_vec(),
            xi: xi.to_vec(),
            eta: eta.to_vec(),
        },
        k,
    })
}

/// A row of `2k − 2` triangles with side normals `η̃₁, η̃₂` on the midline of
/// `Q_{η̃₀}`, `η₀ = η₁ + η₂` (n = 2).
pub fn eta_convexity_triangles(
    lambda: &[f64],
    eta1: &[f64],
    eta2: &[f64],
    k: usize,
) -> Result<Construction, ConstructionError> {
    if lambda.len() != 2 || eta1.len() != 2 || eta2.len() != 2 {
        return Err(ConstructionError::Dimension {
            expected: 2,
            got: lambda.len().max(eta1.len()).max(eta2.len()),
        });
    }
    check_k(k)?;
    let eta0 = linalg::add(eta1, eta2);
    if linalg::norm(&eta0) <= 1e-12 * linalg::norm(eta1).max(linalg::norm(eta2)) {
        return Err(ConstructionError::ZeroSum);
    }
    if linalg::norm(eta1) == 0.0 || linalg::norm(eta2) == 0.0 {
        return Err(ConstructionError::NotUnit("η₁, η₂ (nonzero)"));
    }
    let cross = eta1[0] * eta2[1] - eta1[1] * eta2[0];
    if cross.abs() <= 1e-12 * linalg::norm(eta1) * linalg::norm(eta2) && linalg::dot(eta1, eta2) < 0.0
    {
        return Err(ConstructionError::OppositeCollinear);
    }
    Ok(Construction {
        family: Family::EtaConvexityTriangles {
            lambda: lambda.to_vec(),
            eta1: eta1.to_vec(),
            eta2: eta2.to_vec(),
        },
        k,
    })
}

/// Rigid triangles with skew gradient `A_k = −k² R` (frame `η ↦ e₂`),
/// `k = 2N` even, `λ` unit and not parallel to `η`.
pub fn symmetry_triangles(
    lambda: &[f64],
    eta: &[f64],
    k: usize,
) -> Result<Construction, ConstructionError> {
    if lambda.len() != 2 || eta.len() != 2 {
        return Err(ConstructionError::Dimension {
            expected: 2,
            got: lambda.len().max(eta.len()),
        });
    }
    unit(lambda, "λ")?;
    unit(eta, "η")?;
    check_k(k)?;
    if k % 2 == 1 {
        return Err(ConstructionError::InvalidK {
            k,
            reason: "k must be even",
        });
    }
    let l = fields::to_local(arr(eta), arr(lambda));
    if l[0].abs() <= 1e-12 {
        return Err(ConstructionError::Parallel);
    }
    Ok(Construction {
        family: Family::SymmetryTriangles {
            lambda: lambda.to_vec(),
            eta: eta.to_vec(),
        },
        k,
    })
}

/// Residual `|Σ λᵢ ⊗ ηᵢ − λ ⊙ η|`.
pub fn decomposition_residual(lambda: &[f64], eta: &[f64], atoms: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut m = linalg::sym_outer(lambda, eta);
    for (l, e) in atoms {
        m -= linalg::outer(l, e);
    }
    m.norm()
}

/// `(½λ, η)` and `(½|λ|η, λ/|λ|)`, a decomposition of `λ ⊙ η`.
pub fn symmetrized_atoms(lambda: &[f64], eta: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let half = linalg::scale(lambda, 0.5);
    match linalg::normalized(lambda) {
        Some(dir) => vec![
            (half, eta.to_vec()),
            (linalg::scale(eta, 0.5 * linalg::norm(lambda)), dir),
        ],
        None => vec![(half, eta.to_vec())],
    }
}

/// Šilhavý's lattice competitor on `B_k` for a decomposition
/// `Σ λᵢ ⊗ ηᵢ = λ ⊙ η` (n = 2).
pub fn silhavy_lattice(
    lambda: &[f64],
    eta: &[f64],
    atoms: &[(Vec<f64>, Vec<f64>)],
    k: usize,
) -> Result<Construction, ConstructionError> {
    if lambda.len() != 2 || eta.len() != 2 {
        return Err(ConstructionError::Dimension {
            expected: 2,
            got: lambda.len().max(eta.len()),
        });
    }
    unit(eta, "η")?;
    check_k(k)?;
    for (l, e) in atoms {
        same_dim(l, eta)?;
        same_dim(e, eta)?;
        unit(e, "ηᵢ")?;
    }
    let r = decomposition_residual(lambda, eta, atoms);
    if r > DECOMPOSITION_TOL * linalg::norm(lambda).max(1.0) {
        return Err(ConstructionError::Decomposition(r));
    }
    Ok(Construction {
        family: Family::SilhavyLattice {
            lambda: lambda.to_vec(),
            eta: eta.to_vec(),
            atoms: atoms.to_vec(),
        },
        k,
    })
}

/// Top edge of one triangle `Δ_k` of the symmetry construction.
struct SymTriangle {
    /// Outward unit normal of the edge from the origin to the apex `ξ_k`.
    zeta: [f64; 2],
    xi_len: f64,
}

fn sym_triangle(lambda: [f64; 2], eta: [f64; 2], k: usize) -> SymTriangle {
    let kf = k as f64;
    let l = fields::to_local(eta, lambda);
    let mirrored = l[0] < 0.0;
    let lh = if mirrored { [-l[0], l[1]] } else { l };
    let w = rot(lh);
    let xi = [1.0 / kf + 2.0 * w[0] / (kf * kf), 2.0 * w[1] / (kf * kf)];
    let xi_len = xi[0].hypot(xi[1]);
    // Outward normal of the ccw edge ξ → 0.
    let mut zeta = [-xi[1] / xi_len, xi[0] / xi_len];
    if mirrored {
        zeta = [-zeta[0], zeta[1]];
    }
    SymTriangle {
        zeta: fields::to_world(eta, zeta),
        xi_len,
    }
}

/// Terms of the symmetry-triangle energy at `k`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymmetryTerms {
    /// Uncovered midline, `(2/k) f(λ, η)`.
    pub midline: f64,
    pub d1: f64,
    /// The displayed top-edge value `(|ξ_k| / 2k) f(−η, ζ_k)`.
    pub d2_displayed: f64,
    /// A valid upper bound for the top edge,
    /// `(|ξ_k|/4)(f(λ, ζ_k) + f(−λ, ζ_k)) + (|ξ_k| / 2k) f(−η, ζ_k)`.
    pub d2_valid_bound: f64,
    pub d3: f64,
    pub inside: f64,
}

impl Construction {
    pub fn name(&self) -> &'static str {
        match self.family {
            Family::SingleJump { .. } => "single_jump",
            Family::SubadditivityStrip { .. } => "subadditivity_strip",
            Family::EtaConvexityTriangles { .. } => "eta_convexity_triangles",
            Family::SymmetryTriangles { .. } => "symmetry_triangles",
            Family::SilhavyLattice { .. } => "silhavy_lattice",
        }
    }

    /// Dimension of the ambient space.
    pub fn eta_dimension(&self) -> usize {
        match &self.family {
            Family::SingleJump { eta, .. }
            | Family::SubadditivityStrip { eta, .. }
            | Family::SymmetryTriangles { eta, .. }
            | Family::SilhavyLattice { eta, .. } => eta.len(),
            Family::EtaConvexityTriangles { eta1, .. } => eta1.len(),
        }
    }

    /// Same family at another `k`.
    pub fn with_k(&self, k: usize) -> Result<Construction, ConstructionError> {
        match &self.family {
            Family::SingleJump { lambda, eta } => single_jump(lambda, eta),
            Family::SubadditivityStrip { lambda, xi, eta } => {
                subadditivity_strip(lambda, xi, eta, k)
            }
            Family::EtaConvexityTriangles { lambda, eta1, eta2 } => {
                eta_convexity_triangles(lambda, eta1, eta2, k)
            }
            Family::SymmetryTriangles { lambda, eta } => symmetry_triangles(lambda, eta, k),
            Family::SilhavyLattice { lambda, eta, atoms } => silhavy_lattice(lambda, eta, atoms, k),
        }
    }

    pub fn bound_kind(&self) -> BoundKind {
        match self.family {
            Family::SymmetryTriangles { .. } | Family::SilhavyLattice { .. } => BoundKind::Upper,
            _ => BoundKind::Exact,
        }
    }

    /// Field energies are multiplied by this factor before comparison with
    /// the closed form (`|η₀|` for the η-convexity row, else 1).
    pub fn field_scale(&self) -> f64 {
        match &self.family {
            Family::EtaConvexityTriangles { eta1, eta2, .. } => {
                linalg::norm(&linalg::add(eta1, eta2))
            }
            _ => 1.0,
        }
    }

    /// Energy of the flat jump the competitor is compared with, on the scale
    /// of the closed form.
    pub fn reference(&self, d: &Density) -> f64 {
        match &self.family {
            Family::SingleJump { lambda, eta }
            | Family::SubadditivityStrip { lambda, eta, .. }
            | Family::SymmetryTriangles { lambda, eta }
            | Family::SilhavyLattice { lambda, eta, .. } => d.value(lambda, eta),
            Family::EtaConvexityTriangles { lambda, eta1, eta2 } => {
                d.bar(lambda, &linalg::add(eta1, eta2))
            }
        }
    }

    pub fn closed_form(&self, d: &Density) -> f64 {
        self.closed_form_at(d, self.k)
    }

    /// Closed-form energy (or upper bound, see [`Construction::bound_kind`])
    /// at an arbitrary admissible `k`.
    pub fn closed_form_at(&self, d: &Density, k: usize) -> f64 {
        let kf = k as f64;
        match &self.family {
            Family::SingleJump { lambda, eta } => d.value(lambda, eta),
            Family::SubadditivityStrip { lambda, xi, eta } => {
                let n = eta.len() as i32;
                let a = 1.0 - 1.0 / kf;
                let lm = linalg::sub(lambda, xi);
                let sides: f64 = orthogonal_complement(eta)
                    .iter()
                    .map(|z| d.value(&neg(xi), z) + d.value(&neg(xi), &neg(z)))
                    .sum();
                a.powi(n - 1) * (d.value(&lm, eta) + d.value(xi, eta))
                    + (1.0 / kf) * a.powi(n - 2) * sides
                    + (1.0 - a.powi(n - 1)) * d.value(lambda, eta)
            }
            Family::EtaConvexityTriangles { lambda, eta1, eta2 } => {
                let eta0 = linalg::add(eta1, eta2);
                let n0 = linalg::norm(&eta0);
                let e0 = linalg::scale(&eta0, 1.0 / n0);
                let bar1 = d.bar(lambda, eta1);
                let bar2 = d.bar(lambda, eta2);
                (1.0 - 1.0 / kf) * (bar1 + bar2) + (n0 / kf) * d.value(lambda, &e0)
            }
            Family::SymmetryTriangles { .. } => {
                let t = self.symmetry_terms(d, k);
                t.midline + (kf - 2.0) * (t.d1 + t.d2_displayed + t.d3 + t.inside)
            }
            Family::SilhavyLattice {
                lambda,
                eta,
                atoms,
            } => {
                let sigma: f64 = atoms.iter().map(|(l, _)| linalg::norm(l)).sum();
                let c = d.max_unit();
                let lines: f64 = atoms
                    .iter()
                    .map(|(l, e)| d.value(l, e) * lattice_length(arr(eta), arr(e), k))
                    .sum::<f64>()
                    / kf;
                let nk = d.value(lambda, eta) / kf;
                let m = c * (2.0 / kf) * (2.0 * linalg::norm(lambda) + sigma / kf);
                let rs = c * 2.0 * (1.0 - 1.0 / kf) * sigma / kf;
                lines + nk + m + rs
            }
        }
    }

    /// A closed form that provably bounds the field energy from above for
    /// subadditive `f(·, ν)`. Differs from [`Construction::closed_form_at`]
    /// only for the symmetry triangles, whose displayed top-edge estimate is
    /// not an upper bound.
    pub fn valid_bound_at(&self, d: &Density, k: usize) -> f64 {
        match &self.family {
            Family::SymmetryTriangles { .. } => {
                let t = self.symmetry_terms(d, k);
                t.midline + (k as f64 - 2.0) * (t.d1 + t.d2_valid_bound + t.d3 + t.inside)
            }
            _ => self.closed_form_at(d, k),
        }
    }

    pub fn limit(&self, d: &Density) -> f64 {
        match &self.family {
            Family::SingleJump { lambda, eta } => d.value(lambda, eta),
            Family::SubadditivityStrip { lambda, xi, eta } => {
                d.value(&linalg::sub(lambda, xi), eta) + d.value(xi, eta)
            }
            Family::EtaConvexityTriangles { lambda, eta1, eta2 } => {
                d.bar(lambda, eta1) + d.bar(lambda, eta2)
            }
            Family::SymmetryTriangles { lambda, eta } => d.value(eta, lambda),
            Family::SilhavyLattice { atoms, .. } => {
                atoms.iter().map(|(l, e)| d.value(l, e)).sum()
            }
        }
    }

    /// Limit of [`Construction::valid_bound_at`].
    pub fn valid_limit(&self, d: &Density) -> f64 {
        match &self.family {
            Family::SymmetryTriangles { lambda, eta } => {
                d.value(eta, lambda) + 0.25 * (d.value(lambda, eta) + d.value(&neg(lambda), eta))
            }
            _ => self.limit(d),
        }
    }

    /// `C` with `|closed_form(k) − limit| ≤ C / k`. Read off the formulas for
    /// the exact families; for the two bound families it is the largest
    /// observed `k |closed_form(k) − limit|` over `k ∈ {8, 16, 32, 64}`.
    pub fn rate_constant(&self, d: &Density) -> f64 {
        match &self.family {
            Family::SingleJump { .. } => 0.0,
            Family::SubadditivityStrip { lambda, xi, eta } if eta.len() == 2 => {
                let z = vec![-eta[1], eta[0]];
                (d.value(lambda, eta) + d.value(&neg(xi), &z) + d.value(&neg(xi), &neg(&z))
                    - d.value(&linalg::sub(lambda, xi), eta)
                    - d.value(xi, eta))
                .abs()
            }
            Family::EtaConvexityTriangles { lambda, eta1, eta2 } => {
                let eta0 = linalg::add(eta1, eta2);
                (d.bar(lambda, &eta0)
                    - d.bar(lambda, eta1)
                    - d.bar(lambda, eta2))
                .abs()
            }
            _ => {
                let lim = self.limit(d);
                [8usize, 16, 32, 64]
                    .iter()
                    .map(|&k| k as f64 * (self.closed_form_at(d, k) - lim).abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    /// The individual terms of the symmetry-triangle energy.
    pub fn symmetry_terms(&self, d: &Density, k: usize) -> SymmetryTerms {
        let Family::SymmetryTriangles { lambda, eta } = &self.family else {
            panic!("symmetry_terms on {}", self.name());
        };
        let kf = k as f64;
        let tri = sym_triangle(arr(lambda), arr(eta), k);
        let z = tri.zeta.to_vec();
        let top_e2 = tri.xi_len / (2.0 * kf) * d.value(&neg(eta), &z);
        SymmetryTerms {
            midline: 2.0 / kf * d.value(lambda, eta),
            d1: d.value(eta, eta) / (2.0 * kf * kf),
            d2_displayed: top_e2,
            d2_valid_bound: 0.25 * tri.xi_len * (d.value(lambda, &z) + d.value(&neg(lambda), &z))
                + top_e2,
            d3: (d.value(lambda, lambda) + d.value(&neg(lambda), lambda)) / (2.0 * kf * kf),
            inside: (kf.powi(4) - kf * kf) / kf.powi(5) * d.value(eta, lambda),
        }
    }

    /// Approximate number of cells of the field (to decide whether it is
    /// affordable to build).
    pub fn field_cells_estimate(&self) -> usize {
        let k = self.k;
        match &self.family {
            Family::SingleJump { .. } => 2,
            Family::SubadditivityStrip { .. } => 5,
            Family::EtaConvexityTriangles { .. } => 4 * k,
            Family::SymmetryTriangles { .. } => (k.saturating_sub(2)) * (k * k + 1) + 4,
            Family::SilhavyLattice { atoms, .. } => {
                let mut c = k;
                for _ in atoms {
                    c = c.saturating_mul(k + 2);
                }
                c.min(usize::MAX / 2)
            }
        }
    }

    /// The realizable field (n = 2 only).
    pub fn field(&self) -> Result<PartitionField, ConstructionError> {
        match &self.family {
            Family::SingleJump { lambda, eta } => {
                if eta.len() != 2 {
                    return Err(ConstructionError::FieldDimension);
                }
                Ok(PartitionField::elementary(arr(lambda), arr(eta))?)
            }
            Family::SubadditivityStrip { lambda, xi, eta } => {
                if eta.len() != 2 {
                    return Err(ConstructionError::FieldDimension);
                }
                strip_field(arr(lambda), arr(xi), arr(eta), self.k)
            }
            Family::EtaConvexityTriangles { lambda, eta1, eta2 } => {
                eta_triangle_field(arr(lambda), arr(eta1), arr(eta2), self.k)
            }
            Family::SymmetryTriangles { lambda, eta } => {
                symmetry_field(arr(lambda), arr(eta), self.k)
            }
            Family::SilhavyLattice {
                lambda,
                eta,
                atoms,
            } => silhavy_field(arr(lambda), arr(eta), atoms, self.k),
        }
    }
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Point> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

fn world(eta: [f64; 2], poly: Vec<Point>) -> Vec<Point> {
    poly.into_iter().map(|p| fields::to_world(eta, p)).collect()
}

fn strip_field(
    lambda: [f64; 2],
    xi: [f64; 2],
    eta: [f64; 2],
    k: usize,
) -> Result<PartitionField, ConstructionError> {
    let kf = k as f64;
    let h = 1.0 / kf;
    let s = 0.5 - 0.5 / kf;
    let lm = [lambda[0] - xi[0], lambda[1] - xi[1]];
    let cells = vec![
        RigidCell::constant(world(eta, rect(-0.5, 0.5, -0.5, 0.0)), [0.0, 0.0]),
        RigidCell::constant(world(eta, rect(-s, s, 0.0, h)), lm),
        RigidCell::constant(world(eta, rect(-0.5, -s, 0.0, h)), lambda),
        RigidCell::constant(world(eta, rect(s, 0.5, 0.0, h)), lambda),
        RigidCell::constant(world(eta, rect(-0.5, 0.5, h, 0.5)), lambda),
    ];
    Ok(fields::build_partition(cells, eta, lambda)?)
}

fn eta_triangle_field(
    lambda: [f64; 2],
    eta1: [f64; 2],
    eta2: [f64; 2],
    k: usize,
) -> Result<PartitionField, ConstructionError> {
    let eta0 = [eta1[0] + eta2[0], eta1[1] + eta2[1]];
    let n0 = eta0[0].hypot(eta0[1]);
    let e0 = [eta0[0] / n0, eta0[1] / n0];
    let cross = eta1[0] * eta2[1] - eta1[1] * eta2[0];
    let (l1, l2) = (eta1[0].hypot(eta1[1]), eta2[0].hypot(eta2[1]));
    if cross.abs() <= 1e-12 * l1 * l2 {
        return Ok(PartitionField::elementary(lambda, e0)?);
    }
    let kf = k as f64;
    let rho = 0.5 / kf;
    let n1 = fields::to_local(e0, [eta1[0] / l1, eta1[1] / l1]);
    let n2 = fields::to_local(e0, [eta2[0] / l2, eta2[1] / l2]);
    // The right edge b → p has the outward normal pointing right.
    let (n_bp, len_bp) = if n1[0] > n2[0] {
        (n1, rho * l1 / n0)
    } else {
        (n2, rho * l2 / n0)
    };
    let dir = rot(n_bp);
    let apex_off = [rho + len_bp * dir[0], len_bp * dir[1]];
    let h = apex_off[1];
    let count = 2 * k - 2;
    let x0 = -0.5 + 0.5 / kf;
    let tri = |i: usize| {
        let a = [x0 + i as f64 * rho, 0.0];
        let b = [a[0] + rho, 0.0];
        let p = [a[0] + apex_off[0], h];
        (a, b, p)
    };
    let (a_first, _, p_first) = tri(0);
    let (_, b_last, p_last) = tri(count - 1);
    if !(h > 0.0 && h < 0.5 && p_first[0] > -0.5 && p_last[0] < 0.5) {
        return Err(ConstructionError::Unrealizable(format!(
            "triangle apex at height {h:.3e}, row spans [{:.4}, {:.4}]",
            p_first[0], p_last[0]
        )));
    }
    let zero = [0.0, 0.0];
    let mut cells = vec![
        RigidCell::constant(world(e0, rect(-0.5, 0.5, -0.5, 0.0)), zero),
        RigidCell::constant(world(e0, rect(-0.5, 0.5, h, 0.5)), lambda),
        RigidCell::constant(
            world(e0, vec![[-0.5, 0.0], a_first, p_first, [-0.5, h]]),
            lambda,
        ),
        RigidCell::constant(
            world(e0, vec![b_last, [0.5, 0.0], [0.5, h], p_last]),
            lambda,
        ),
    ];
    for i in 0..count {
        let (a, b, p) = tri(i);
        cells.push(RigidCell::constant(world(e0, vec![a, b, p]), zero));
        if i + 1 < count {
            let (_, _, p_next) = tri(i + 1);
            cells.push(RigidCell::constant(world(e0, vec![b, p_next, p]), lambda));
        }
    }
    Ok(fields::build_partition(cells, e0, lambda)?)
}

fn symmetry_field(
    lambda: [f64; 2],
    eta: [f64; 2],
    k: usize,
) -> Result<PartitionField, ConstructionError> {
    let kf = k as f64;
    let l = fields::to_local(eta, lambda);
    let mirrored = l[0] < 0.0;
    // Build for λ̂ with λ̂₁ > 0 in the local frame; mirror by P = diag(−1, 1).
    let lh = if mirrored { [-l[0], l[1]] } else { l };
    let w = rot(lh);
    let big_n = k / 2;
    let k2 = kf * kf;
    let h = 2.0 * w[1] / k2;
    let apex = [1.0 / kf + 2.0 * w[0] / k2, h];
    let c_of = |i: i64| i as f64 / kf;
    let first = 1 - big_n as i64;
    let last = big_n as i64 - 2;
    if !(apex[0] + c_of(last) < 0.5 && apex[0] + c_of(first) > -0.5 && h < 0.5) {
        return Err(ConstructionError::Unrealizable(
            "triangle row leaves the square".into(),
        ));
    }
    let mut local: Vec<RigidCell> = vec![
        RigidCell::constant(rect(-0.5, 0.5, -0.5, 0.0), [0.0, 0.0]),
        RigidCell::constant(rect(-0.5, 0.5, h, 0.5), lh),
    ];
    let p_of = |i: i64| [c_of(i) + apex[0], h];
    local.push(RigidCell::constant(
        vec![[-0.5, 0.0], [c_of(first), 0.0], p_of(first), [-0.5, h]],
        lh,
    ));
    local.push(RigidCell::constant(
        vec![[c_of(last) + 1.0 / kf, 0.0], [0.5, 0.0], [0.5, h], p_of(last)],
        lh,
    ));
    let nrm = [-lh[0], -lh[1]];
    for i in first..=last {
        let c = c_of(i);
        let tri = vec![[c, 0.0], [c + 1.0 / kf, 0.0], p_of(i)];
        if i < last {
            local.push(RigidCell::constant(
                vec![[c + 1.0 / kf, 0.0], p_of(i + 1), p_of(i)],
                lh,
            ));
        }
        let kk = k * k;
        for j in 1..=kk {
            let mut poly = tri.clone();
            if j > 1 {
                // keep (x − (c + (j−1)/k³) e₁)·λ̂ ≥ 0
                let x0 = c + (j - 1) as f64 / (k2 * kf);
                poly = geometry::clip_halfplane(&poly, nrm, -x0 * lh[0]);
            }
            if j < kk {
                let x1 = c + j as f64 / (k2 * kf);
                poly = geometry::clip_halfplane(&poly, lh, x1 * lh[0]);
            }
            // u = A_k (x − c e₁) + (j/k) e₂ with A_k = −k² R.
            local.push(RigidCell {
                polygon: poly,
                spin: -k2,
                offset: [0.0, k2 * c + j as f64 / kf],
            });
        }
    }
    let cells = local
        .into_iter()
        .map(|mut cell| {
            if mirrored {
                cell.polygon = cell
                    .polygon
                    .into_iter()
                    .rev()
                    .map(|p| [-p[0], p[1]])
                    .collect();
                cell.spin = -cell.spin;
                cell.offset = [-cell.offset[0], cell.offset[1]];
            }
            cell.polygon = world(eta, cell.polygon);
            cell.offset = fields::to_world(eta, cell.offset);
            cell
        })
        .collect();
    Ok(fields::build_partition(cells, eta, lambda)?)
}

/// Total length of the lattice lines `k² x·ηᵢ ∈ ℤ` crossing the interior of
/// `B_k`; lines along an edge of `B_k` are excluded.
pub fn lattice_length(eta: [f64; 2], eta_i: [f64; 2], k: usize) -> f64 {
    let bk = bk_polygon(eta, k);
    let k2 = (k * k) as f64;
    let vals: Vec<f64> = bk.iter().map(|p| geometry::dot(*p, eta_i)).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let j0 = (lo * k2).ceil() as i64;
    let j1 = (hi * k2).floor() as i64;
    for j in j0..=j1 {
        let c = j as f64 / k2;
        if on_edge(&bk, eta_i, c) {
            continue;
        }
        total += geometry::chord_length(&bk, eta_i, c);
    }
    total
}

fn on_edge(poly: &[Point], n: [f64; 2], c: f64) -> bool {
    let m = poly.len();
    (0..m).any(|i| {
        (geometry::dot(poly[i], n) - c).abs() <= 1e-13
            && (geometry::dot(poly[(i + 1) % m], n) - c).abs() <= 1e-13
    })
}

fn bk_polygon(eta: [f64; 2], k: usize) -> Vec<Point> {
    let kf = k as f64;
    let s = 0.5 - 0.5 / kf;
    world(eta, rect(-s, s, 0.0, 1.0 / kf))
}

fn silhavy_field(
    lambda: [f64; 2],
    eta: [f64; 2],
    atoms: &[(Vec<f64>, Vec<f64>)],
    k: usize,
) -> Result<PartitionField, ConstructionError> {
    let kf = k as f64;
    let k2 = kf * kf;
    let mut pieces = vec![bk_polygon(eta, k)];
    for (_, e) in atoms {
        let n = arr(e);
        let mut next = Vec::with_capacity(pieces.len() * 2);
        for poly in pieces {
            let vals: Vec<f64> = poly.iter().map(|p| geometry::dot(*p, n)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut rest = poly;
            let j0 = (lo * k2).floor() as i64 + 1;
            let j1 = (hi * k2).ceil() as i64 - 1;
            for j in j0..=j1 {
                let c = j as f64 / k2;
                let below = geometry::clip_halfplane(&rest, n, c);
                let above = geometry::clip_halfplane(&rest, [-n[0], -n[1]], -c);
                if below.len() >= 3 && geometry::signed_area(&below) > 1e-18 {
                    next.push(below);
                }
                rest = above;
                if rest.len() < 3 {
                    break;
                }
            }
            if rest.len() >= 3 && geometry::signed_area(&rest) > 1e-18 {
                next.push(rest);
            }
        }
        pieces = next;
    }
    // v_k(x) = Σ (1/k) λᵢ ⌊k² x·ηᵢ⌋ − k (η ⊗ λ)^skew x
    let spin = 0.5 * kf * (eta[0] * lambda[1] - lambda[0] * eta[1]);
    let mut cells: Vec<RigidCell> = pieces
        .into_iter()
        .map(|poly| {
            let c = geometry::centroid(&poly);
            let mut b = [0.0, 0.0];
            for (l, e) in atoms {
                let fl = (k2 * geometry::dot(c, arr(e))).floor();
                b[0] += l[0] * fl / kf;
                b[1] += l[1] * fl / kf;
            }
            RigidCell {
                polygon: poly,
                spin,
                offset: b,
            }
        })
        .collect();
    let s = 0.5 - 0.5 / kf;
    let h = 1.0 / kf;
    cells.push(RigidCell::constant(world(eta, rect(-0.5, 0.5, -0.5, 0.0)), [0.0, 0.0]));
    cells.push(RigidCell::constant(world(eta, rect(-0.5, -s, 0.0, h)), lambda));
    cells.push(RigidCell::constant(world(eta, rect(s, 0.5, 0.0, h)), lambda));
    cells.push(RigidCell::constant(world(eta, rect(-0.5, 0.5, h, 0.5)), lambda));
    Ok(fields::build_partition(cells, eta, lambda)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::total_energy;

    fn frob() -> Density {
        Density::frobenius(2)
    }

    fn field_energy(c: &Construction, d: &Density) -> f64 {
        total_energy(d, &c.field().unwrap(), 1e-10).unwrap().total * c.field_scale()
    }

    #[test]
    fn single_jump_examples() {
        let c = single_jump(&[0.0, 2.0], &[0.0, 1.0]).unwrap();
        assert_eq!(c.closed_form(&frob()), 2.0);
        assert!((field_energy(&c, &frob()) - 2.0).abs() < 1e-14);
        let an = Density::weighted_aniso(vec![1.0, 3.0]);
        assert_eq!(single_jump(&[0.0, 1.0], &[1.0, 0.0]).unwrap().closed_form(&an), 3.0);
    }

    #[test]
    fn strip_matches_field() {
        let d = Density::weighted_aniso(vec![1.0, 3.0]);
        let s = 0.6f64.sqrt();
        let eta = [s, (1.0 - s * s).sqrt()];
        let c = subadditivity_strip(&[0.3, 2.0], &[1.0, -0.5], &eta, 8).unwrap();
        assert!((field_energy(&c, &d) - c.closed_form(&d)).abs() < 1e-12);
        let c = subadditivity_strip(&[0.0, 2.0], &[0.0, 1.0], &[0.0, 1.0], 8).unwrap();
        assert!((c.limit(&frob()) - 2.0).abs() < 1e-15);
        assert!(subadditivity_strip(&[0.0, 2.0], &[0.0, 1.0], &[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn eta_triangles_match_field() {
        let d = frob();
        let c = eta_convexity_triangles(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], 8).unwrap();
        assert!((c.limit(&d) - 2.0).abs() < 1e-15);
        assert!((field_energy(&c, &d) - c.closed_form(&d)).abs() < 1e-12);
        let an = Density::weighted_aniso(vec![1.0, 3.0]);
        let c = eta_convexity_triangles(&[0.5, -1.0], &[0.3, 0.8], &[-0.9, 0.2], 16).unwrap();
        assert!((field_energy(&c, &an) - c.closed_form(&an)).abs() < 1e-12);
        assert!(matches!(
            eta_convexity_triangles(&[1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0], 8),
            Err(ConstructionError::ZeroSum)
        ));
    }

    #[test]
    fn symmetry_terms_at_four() {
        let c = symmetry_triangles(&[1.0, 0.0], &[0.0, 1.0], 4).unwrap();
        let t = c.symmetry_terms(&frob(), 4);
        assert!((t.d1 - 1.0 / 32.0).abs() < 1e-15);
        assert!((t.inside - 0.234375).abs() < 1e-15);
        assert!(symmetry_triangles(&[0.0, 1.0], &[0.0, 1.0], 4).is_err());
        assert!(symmetry_triangles(&[1.0, 0.0], &[0.0, 1.0], 5).is_err());
    }

    #[test]
    fn symmetry_field_under_valid_bound() {
        let d = frob();
        for lambda in [[0.6, 0.8], [-0.6, 0.8], [0.8, -0.6]] {
            let c = symmetry_triangles(&lambda, &[0.0, 1.0], 8).unwrap();
            let e = field_energy(&c, &d);
            assert!(e <= c.valid_bound_at(&d, 8) + 1e-8, "{e}");
            assert!(e >= d.value(&lambda, &[0.0, 1.0]) - 1e-9);
        }
    }

    #[test]
    fn silhavy_field_under_bound() {
        let d = frob();
        let lambda = [0.6, 0.8];
        let eta = [0.0, 1.0];
        let atoms = symmetrized_atoms(&lambda, &eta);
        let c = silhavy_lattice(&lambda, &eta, &atoms, 8).unwrap();
        let e = field_energy(&c, &d);
        assert!(e <= c.closed_form(&d) + 1e-8);
        assert!(e >= d.value(&lambda, &eta) - 1e-9);
        let n10 = silhavy_lattice(&lambda, &eta, &atoms, 10).unwrap();
        assert!(n10.closed_form(&d).is_finite());
    }
}
