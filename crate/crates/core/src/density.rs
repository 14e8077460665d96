//! Surface densities `f(λ, η)`: even, positively 1-homogeneous in `λ`,
//! nonnegative, with `η` on the unit sphere.
//!
//! Besides evaluation this module provides the 1-homogeneous extension
//! `f̄(λ, ζ) = |ζ| f(λ, ζ/|ζ|)`, the rank-one factorization `F = λ ⊗ η` and
//! the rank-one supported function `φ_f`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::sampling;
use crate::tolerances::{RANK1_REL_TOL, UNIT_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("dimension mismatch: expected {expected}, got {got} for {what}")]
    Dimension {
        expected: usize,
        got: usize,
        what: &'static str,
    },
    #[error("eta is not a unit vector (|eta| = {0})")]
    NotUnit(f64),
    #[error("matrix is not rank one (sigma_2 / |F| = {0:e})")]
    NotRankOne(f64),
    #[error("tabulated density queried outside its grid (extrapolation forbidden)")]
    Extrapolation,
    #[error("invalid density field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> DensityError {
    DensityError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Positive function on the sphere used by the product-norm kind.
#[derive(Clone, Debug, PartialEq)]
pub enum SphereFn {
    Constant(f64),
    /// `a0 + Σ_m (cos[m-1] cos(mθ) + sin[m-1] sin(mθ))`, θ the angle of η (n = 2).
    Fourier { a0: f64, cos: Vec<f64>, sin: Vec<f64> },
    /// `√(ηᵀ M η)` with `M` symmetric positive semidefinite.
    Quadratic(Vec<Vec<f64>>),
}

impl SphereFn {
    pub fn eval(&self, eta: &[f64]) -> f64 {
        match self {
            SphereFn::Constant(c) => *c,
            SphereFn::Fourier { a0, cos, sin } => {
                let th = eta[1].atan2(eta[0]);
                let mut s = *a0;
                for (m, c) in cos.iter().enumerate() {
                    s += c * ((m + 1) as f64 * th).cos();
                }
                for (m, c) in sin.iter().enumerate() {
                    s += c * ((m + 1) as f64 * th).sin();
                }
                s
            }
            SphereFn::Quadratic(m) => {
                let q: f64 = (0..eta.len())
                    .map(|i| eta[i] * linalg::dot(&m[i], eta))
                    .sum();
                q.max(0.0).sqrt()
            }
        }
    }

    fn max_on_sphere(&self, n: usize) -> f64 {
        match self {
            SphereFn::Constant(c) => *c,
            SphereFn::Fourier { .. } => (0..7200)
                .map(|i| {
                    let th = TAU * i as f64 / 7200.0;
                    self.eval(&[th.cos(), th.sin()])
                })
                .fold(f64::NEG_INFINITY, f64::max),
            SphereFn::Quadratic(m) => {
                let mat = Matrix::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
                let ev = mat.symmetric_eigenvalues();
                ev.iter().fold(0.0f64, |a, b| a.max(*b)).sqrt()
            }
        }
    }

    fn to_json(&self) -> Value {
        match self {
            SphereFn::Constant(c) => json!({"type": "constant", "value": c}),
            SphereFn::Fourier { a0, cos, sin } => {
                json!({"type": "fourier", "a0": a0, "cos": cos, "sin": sin})
            }
            SphereFn::Quadratic(m) => json!({"type": "quadratic", "matrix": m}),
        }
    }
}

/// Piecewise-linear table `h(θ_λ, θ_η)` on a product grid of angles in
/// `[0, 2π)`; the density is `|λ| h(angle(λ/|λ|), angle(η))` (n = 2).
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub lambda_angles: Vec<f64>,
    pub eta_angles: Vec<f64>,
    /// `values[i][j]` at `(lambda_angles[i], eta_angles[j])`.
    pub values: Vec<Vec<f64>>,
    /// Wrap around from the last angle to the first one plus 2π.
    pub periodic: bool,
}

impl Table {
    /// Locates `th` on `grid`: (lower index, upper index, weight of upper).
    fn locate(grid: &[f64], th: f64, periodic: bool) -> Option<(usize, usize, f64)> {
        let n = grid.len();
        if n == 1 {
            return if periodic || (th - grid[0]).abs() < 1e-12 {
                Some((0, 0, 0.0))
            } else {
                None
            };
        }
        let th = th.rem_euclid(TAU);
        if let Some(i) = (0..n - 1).find(|&i| th >= grid[i] && th <= grid[i + 1]) {
            let t = (th - grid[i]) / (grid[i + 1] - grid[i]);
            return Some((i, i + 1, t));
        }
        if periodic {
            let lo = grid[n - 1];
            let hi = grid[0] + TAU;
            let x = if th < grid[0] { th + TAU } else { th };
            let t = (x - lo) / (hi - lo);
            return Some((n - 1, 0, t));
        }
        let tol = 1e-12;
        if (th - grid[n - 1]).abs() < tol || (th - grid[0] - TAU).abs() < tol {
            return Some((n - 1, n - 1, 0.0));
        }
        None
    }

    fn eval_unit(&self, theta_l: f64, theta_e: f64) -> Option<f64> {
        let (i0, i1, s) = Self::locate(&self.lambda_angles, theta_l, self.periodic)?;
        let (j0, j1, t) = Self::locate(&self.eta_angles, theta_e, self.periodic)?;
        let v = &self.values;
        Some(
            (1.0 - s) * (1.0 - t) * v[i0][j0]
                + s * (1.0 - t) * v[i1][j0]
                + (1.0 - s) * t * v[i0][j1]
                + s * t * v[i1][j1],
        )
    }

    fn validate(&self) -> Result<(), DensityError> {
        for (name, g) in [
            ("params.lambda_angles", &self.lambda_angles),
            ("params.eta_angles", &self.eta_angles),
        ] {
            if g.is_empty() {
                return Err(invalid(name, "must be non-empty"));
            }
            if g.iter().any(|a| !(0.0..TAU).contains(a)) {
                return Err(invalid(name, "angles must lie in [0, 2π)"));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(name, "angles must be strictly increasing"));
            }
        }
        if self.values.len() != self.lambda_angles.len()
            || self
                .values
                .iter()
                .any(|r| r.len() != self.eta_angles.len())
        {
            return Err(invalid(
                "params.values",
                "shape must be lambda_angles × eta_angles",
            ));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("params.values", "entries must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// User-supplied evaluation rule (library use only, not serializable).
pub type CustomFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Kind {
    Frobenius,
    WeightedAniso { w: Vec<f64> },
    PNorm { p: f64 },
    ProductNorm { g: SphereFn, p: f64 },
    Tabulated(Table),
    Custom { name: String, f: CustomFn },
}

impl fmt::Debug for Kind {
    fn fmt(&self, fmtr: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Frobenius => write!(fmtr, "Frobenius"),
            Kind::WeightedAniso { w } => write!(fmtr, "WeightedAniso({w:?})"),
            Kind::PNorm { p } => write!(fmtr, "PNorm({p})"),
            Kind::ProductNorm { g, p } => write!(fmtr, "ProductNorm({g:?}, p={p})"),
            Kind::Tabulated(_) => write!(fmtr, "Tabulated"),
            Kind::Custom { name, .. } => write!(fmtr, "Custom({name})"),
        }
    }
}

fn p_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        linalg::norm(v)
    } else if p.is_infinite() {
        v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    } else {
        let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m == 0.0 {
            return 0.0;
        }
        m * v.iter().map(|x| (x.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Largest `|λ|_p` over the Euclidean unit sphere of ℝⁿ.
fn p_norm_max_on_sphere(n: usize, p: f64) -> f64 {
    let e = (1.0 / p - 0.5).max(0.0);
    (n as f64).powf(e)
}

/// An evaluable surface density with its dimension.
#[derive(Clone, Debug)]
pub struct Density {
    pub dimension: usize,
    pub kind: Kind,
}

impl Density {
    pub fn frobenius(n: usize) -> Self {
        Density {
            dimension: n,
            kind: Kind::Frobenius,
        }
    }

    pub fn weighted_aniso(w: Vec<f64>) -> Self {
        Density {
            dimension: w.len(),
            kind: Kind::WeightedAniso { w },
        }
    }

    pub fn p_norm(n: usize, p: f64) -> Self {
        Density {
            dimension: n,
            kind: Kind::PNorm { p },
        }
    }

    pub fn product_norm(n: usize, g: SphereFn, p: f64) -> Self {
        Density {
            dimension: n,
            kind: Kind::ProductNorm { g, p },
        }
    }

    pub fn tabulated(table: Table) -> Result<Self, DensityError> {
        table.validate()?;
        Ok(Density {
            dimension: 2,
            kind: Kind::Tabulated(table),
        })
    }

    pub fn custom(
        n: usize,
        name: &str,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Density {
            dimension: n,
            kind: Kind::Custom {
                name: name.to_string(),
                f: Arc::new(f),
            },
        }
    }

    pub fn kind_name(&self) -> &str {
        match &self.kind {
            Kind::Frobenius => "frobenius",
            Kind::WeightedAniso { .. } => "weighted-aniso",
            Kind::PNorm { .. } => "p-norm",
            Kind::ProductNorm { .. } => "product-norm",
            Kind::Tabulated(_) => "tabulated",
            Kind::Custom { name, .. } => name,
        }
    }

    /// Evaluates without input checks. Tabulated densities return NaN
    /// outside their grid; use [`Density::eval`] for checked evaluation.
    pub fn value(&self, lambda: &[f64], eta: &[f64]) -> f64 {
        match &self.kind {
            Kind::Frobenius => linalg::norm(lambda),
            Kind::WeightedAniso { w } => w.iter().zip(lambda).map(|(w, l)| w * l.abs()).sum(),
            Kind::PNorm { p } => p_norm(lambda, *p),
            Kind::ProductNorm { g, p } => g.eval(eta) * p_norm(lambda, *p),
            Kind::Tabulated(t) => {
                let r = linalg::norm(lambda);
                if r == 0.0 {
                    return 0.0;
                }
                let tl = lambda[1].atan2(lambda[0]);
                let te = eta[1].atan2(eta[0]);
                t.eval_unit(tl, te).map_or(f64::NAN, |h| r * h)
            }
            Kind::Custom { f, .. } => f(lambda, eta),
        }
    }

    fn check_dims(&self, v: &[f64], what: &'static str) -> Result<(), DensityError> {
        if v.len() != self.dimension {
            return Err(DensityError::Dimension {
                expected: self.dimension,
                got: v.len(),
                what,
            });
        }
        Ok(())
    }

    /// `f(λ, η)` with dimension and unit-length checks.
    pub fn eval(&self, lambda: &[f64], eta: &[f64]) -> Result<f64, DensityError> {
        self.check_dims(lambda, "lambda")?;
        self.check_dims(eta, "eta")?;
        let r = linalg::norm(eta);
        if (r - 1.0).abs() > UNIT_TOL {
            return Err(DensityError::NotUnit(r));
        }
        let v = self.value(lambda, eta);
        if v.is_nan() {
            return Err(DensityError::Extrapolation);
        }
        Ok(v)
    }

    /// `f̄(λ, ζ) = |ζ| f(λ, ζ/|ζ|)`, and 0 for `ζ = 0`. Unchecked.
    pub fn bar(&self, lambda: &[f64], zeta: &[f64]) -> f64 {
        let r = linalg::norm(zeta);
        if r == 0.0 {
            return 0.0;
        }
        let e: Vec<f64> = zeta.iter().map(|z| z / r).collect();
        r * self.value(lambda, &e)
    }

    /// Checked version of [`Density::bar`].
    pub fn extend_bar(&self, lambda: &[f64], zeta: &[f64]) -> Result<f64, DensityError> {
        self.check_dims(lambda, "lambda")?;
        self.check_dims(zeta, "zeta")?;
        let v = self.bar(lambda, zeta);
        if v.is_nan() {
            return Err(DensityError::Extrapolation);
        }
        Ok(v)
    }

    /// True when every `(λ, η)` can be evaluated (no grid gaps).
    pub fn is_total(&self) -> bool {
        match &self.kind {
            // Angles live in [0, 2π), so only a wrapping table covers the circle.
            Kind::Tabulated(t) => t.periodic,
            _ => true,
        }
    }

    /// Errors unless the density is defined on all of ℝⁿ × Sⁿ⁻¹.
    pub fn ensure_total(&self) -> Result<(), DensityError> {
        if self.is_total() {
            Ok(())
        } else {
            Err(invalid(
                "params.periodic",
                "operation needs a table covering the whole circle (set periodic)",
            ))
        }
    }

    /// `C = max f` over unit `λ` and unit `η` (exact for the closed-form
    /// kinds, a fine-grid maximum otherwise).
    pub fn max_unit(&self) -> f64 {
        let n = self.dimension;
        match &self.kind {
            Kind::Frobenius => 1.0,
            Kind::WeightedAniso { w } => linalg::norm(w),
            Kind::PNorm { p } => p_norm_max_on_sphere(n, *p),
            Kind::ProductNorm { g, p } => g.max_on_sphere(n).max(0.0) * p_norm_max_on_sphere(n, *p),
            Kind::Tabulated(t) => t.values.iter().flatten().fold(0.0f64, |a, v| a.max(*v)),
            Kind::Custom { .. } => {
                let mut best = 0.0f64;
                if n == 2 {
                    let m = 720;
                    for i in 0..m {
                        let a = TAU * i as f64 / m as f64;
                        for j in 0..m / 2 {
                            let b = PI * j as f64 / (m / 2) as f64;
                            let v = self.value(&[a.cos(), a.sin()], &[b.cos(), b.sin()]);
                            best = best.max(v);
                        }
                    }
                } else {
                    let mut rng = sampling::rng(0);
                    for _ in 0..200_000 {
                        let l = sampling::unit_sphere(&mut rng, n);
                        let e = sampling::unit_sphere(&mut rng, n);
                        best = best.max(self.value(&l, &e));
                    }
                }
                best
            }
        }
    }

    /// Parses `{"dimension": n, "kind": "...", "params": {...}}`.
    pub fn from_json(v: &Value) -> Result<Self, DensityError> {
        let obj = v
            .as_object()
            .ok_or_else(|| invalid("<root>", "expected a JSON object"))?;
        let dimension = obj
            .get("dimension")
            .and_then(Value::as_u64)
            .ok_or_else(|| invalid("dimension", "expected a positive integer"))?
            as usize;
        if dimension == 0 {
            return Err(invalid("dimension", "must be ≥ 1"));
        }
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| invalid("kind", "expected a string"))?;
        let empty = Map::new();
        let params = match obj.get("params") {
            None | Some(Value::Null) => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => return Err(invalid("params", "expected an object")),
        };
        let d = match kind {
            "frobenius" => Density::frobenius(dimension),
            "weighted-aniso" => {
                let w = num_array(params.get("w"), "params.w")?;
                if w.len() != dimension {
                    return Err(invalid("params.w", format!("expected {dimension} weights")));
                }
                if w.iter().any(|x| *x < 0.0) {
                    return Err(invalid("params.w", "weights must be nonnegative"));
                }
                Density::weighted_aniso(w)
            }
            "p-norm" => Density::p_norm(dimension, parse_p(params.get("p"), "params.p")?),
            "product-norm" => {
                let p = match params.get("p") {
                    None => 2.0,
                    some => parse_p(some, "params.p")?,
                };
                let g = parse_sphere_fn(params.get("g"), dimension)?;
                Density::product_norm(dimension, g, p)
            }
            "tabulated" => {
                if dimension != 2 {
                    return Err(invalid("dimension", "tabulated densities require n = 2"));
                }
                let lambda_angles = num_array(params.get("lambda_angles"), "params.lambda_angles")?;
                let eta_angles = num_array(params.get("eta_angles"), "params.eta_angles")?;
                let values = params
                    .get("values")
                    .and_then(Value::as_array)
                    .ok_or_else(|| invalid("params.values", "expected an array of arrays"))?
                    .iter()
                    .enumerate()
                    .map(|(i, r)| num_array(Some(r), &format!("params.values[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                let periodic = match params.get("periodic") {
                    None => true,
                    Some(Value::Bool(b)) => *b,
                    Some(_) => return Err(invalid("params.periodic", "expected a boolean")),
                };
                Density::tabulated(Table {
                    lambda_angles,
                    eta_angles,
                    values,
                    periodic,
                })?
            }
            other => return Err(invalid("kind", format!("unknown kind `{other}`"))),
        };
        Ok(d)
    }

    /// Inverse of [`Density::from_json`]. Custom densities have no JSON form.
    pub fn to_json(&self) -> Option<Value> {
        let params = match &self.kind {
            Kind::Frobenius => json!({}),
            Kind::WeightedAniso { w } => json!({ "w": w }),
            Kind::PNorm { p } => json!({ "p": p }),
            Kind::ProductNorm { g, p } => json!({ "p": p, "g": g.to_json() }),
            Kind::Tabulated(t) => json!({
                "lambda_angles": t.lambda_angles,
                "eta_angles": t.eta_angles,
                "values": t.values,
                "periodic": t.periodic,
            }),
            Kind::Custom { .. } => return None,
        };
        Some(json!({"dimension": self.dimension, "kind": self.kind_name(), "params": params}))
    }
}

fn num_array(v: Option<&Value>, field: &str) -> Result<Vec<f64>, DensityError> {
    let arr = v
        .and_then(Value::as_array)
        .ok_or_else(|| invalid(field, "expected an array of numbers"))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| invalid(field, "expected finite numbers"))
        })
        .collect()
}

fn parse_p(v: Option<&Value>, field: &str) -> Result<f64, DensityError> {
    match v {
        Some(Value::String(s)) if s == "inf" => Ok(f64::INFINITY),
        Some(x) => {
            let p = x
                .as_f64()
                .ok_or_else(|| invalid(field, "expected a number ≥ 1 or \"inf\""))?;
            if p >= 1.0 {
                Ok(p)
            } else {
                Err(invalid(field, "p must be ≥ 1"))
            }
        }
        None => Err(invalid(field, "missing")),
    }
}

fn parse_sphere_fn(v: Option<&Value>, n: usize) -> Result<SphereFn, DensityError> {
    let obj = v
        .and_then(Value::as_object)
        .ok_or_else(|| invalid("params.g", "expected an object with a `type`"))?;
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("params.g.type", "expected a string"))?;
    match ty {
        "constant" => {
            let c = obj
                .get("value")
                .and_then(Value::as_f64)
                .ok_or_else(|| invalid("params.g.value", "expected a number"))?;
            if c < 0.0 {
                return Err(invalid("params.g.value", "must be ≥ 0"));
            }
            Ok(SphereFn::Constant(c))
        }
        "fourier" => {
            if n != 2 {
                return Err(invalid("params.g.type", "fourier sphere functions need n = 2"));
            }
            let a0 = obj
                .get("a0")
                .and_then(Value::as_f64)
                .ok_or_else(|| invalid("params.g.a0", "expected a number"))?;
            let cos = match obj.get("cos") {
                None => vec![],
                some => num_array(some, "params.g.cos")?,
            };
            let sin = match obj.get("sin") {
                None => vec![],
                some => num_array(some, "params.g.sin")?,
            };
            let g = SphereFn::Fourier { a0, cos, sin };
            let min = (0..3600)
                .map(|i| {
                    let th = TAU * i as f64 / 3600.0;
                    g.eval(&[th.cos(), th.sin()])
                })
                .fold(f64::INFINITY, f64::min);
            if min < 0.0 {
                return Err(invalid("params.g", "fourier series takes negative values"));
            }
            Ok(g)
        }
        "quadratic" => {
            let rows = obj
                .get("matrix")
                .and_then(Value::as_array)
                .ok_or_else(|| invalid("params.g.matrix", "expected an n×n array"))?
                .iter()
                .enumerate()
                .map(|(i, r)| num_array(Some(r), &format!("params.g.matrix[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(invalid("params.g.matrix", format!("expected {n}×{n}")));
            }
            Ok(SphereFn::Quadratic(rows))
        }
        other => Err(invalid("params.g.type", format!("unknown sphere function `{other}`"))),
    }
}

/// Result of [`rank1_factor`].
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Factorization {
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub is_zero: bool,
}

/// Factors a numerically rank-one `F` as `λ ⊗ η` with `|η| = 1` and the first
/// nonzero component of `η` positive.
pub fn rank1_factor(f: &Matrix, tol: f64) -> Result<Rank1Factorization, DensityError> {
    let n = f.nrows();
    let fnorm = f.norm();
    if fnorm <= tol {
        let mut eta = vec![0.0; n];
        eta[0] = 1.0;
        return Ok(Rank1Factorization {
            lambda: vec![0.0; n],
            eta,
            is_zero: true,
        });
    }
    let s = linalg::singular_values(f);
    let ratio = s.get(1).copied().unwrap_or(0.0) / fnorm;
    if ratio > tol {
        return Err(DensityError::NotRankOne(ratio));
    }
    let row = (0..n)
        .max_by(|&a, &b| f.row(a).norm().total_cmp(&f.row(b).norm()))
        .unwrap_or(0);
    let r: Vec<f64> = f.row(row).iter().copied().collect();
    let mut eta = linalg::normalized(&r).ok_or(DensityError::NotRankOne(ratio))?;
    let lead = eta.iter().position(|x| x.abs() > 1e-12).unwrap_or(0);
    if eta[lead] < 0.0 {
        eta.iter_mut().for_each(|x| *x = -*x);
    }
    let lambda: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| f[(i, j)] * eta[j]).sum())
        .collect();
    Ok(Rank1Factorization {
        lambda,
        eta,
        is_zero: false,
    })
}

/// `φ_f(F)`: `f(λ, η)` if `F = λ ⊗ η`, `+∞` otherwise.
pub fn phi_extended(d: &Density, f: &Matrix, tol: f64) -> Result<f64, DensityError> {
    if f.nrows() != d.dimension || f.ncols() != d.dimension {
        return Err(DensityError::Dimension {
            expected: d.dimension,
            got: f.nrows(),
            what: "F",
        });
    }
    match rank1_factor(f, tol) {
        Ok(r) if r.is_zero => Ok(0.0),
        Ok(r) => d.eval(&r.lambda, &r.eta),
        Err(DensityError::NotRankOne(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Default rank-one tolerance.
pub fn rank1_tol() -> f64 {
    RANK1_REL_TOL
}

/// Worst observed violation together with the inputs that produced it.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct Violation {
    pub value: f64,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub alpha: Option<f64>,
}

impl Violation {
    fn record(&mut self, value: f64, lambda: &[f64], eta: &[f64], alpha: Option<f64>) {
        if value > self.value || (value.is_nan() && !self.value.is_nan()) {
            *self = Violation {
                value,
                lambda: lambda.to_vec(),
                eta: eta.to_vec(),
                alpha,
            };
        }
    }
}

/// Worst-case sampled violations of the standing assumptions on `f`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub seed: u64,
    /// `max(0, −f)`.
    pub nonnegativity: Violation,
    /// `|f(−λ,−η) − f(λ,η)| / max(1, f)`.
    pub evenness: Violation,
    /// `|f(αλ,η) − α f(λ,η)| / max(1, α f, f(αλ,η))`, α log-uniform in `[1e-3, 1e3]`.
    pub homogeneity: Violation,
    /// `|f(λ',η') − f(λ,η)| / max(1, f)` for perturbations of angle 1e-6.
    pub continuity: Violation,
    /// `f(0, η)`.
    pub zero: Violation,
}

impl ValidationReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.nonnegativity.value,
            self.evenness.value,
            self.homogeneity.value,
            self.zero.value,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Samples `(λ, η, α)` and reports the worst violations. Deterministic in `seed`.
pub fn validate(d: &Density, sample_count: usize, seed: u64) -> ValidationReport {
    let n = d.dimension;
    let mut rng = sampling::rng(seed);
    let mut rep = ValidationReport {
        samples: sample_count,
        seed,
        nonnegativity: Violation::default(),
        evenness: Violation::default(),
        homogeneity: Violation::default(),
        continuity: Violation::default(),
        zero: Violation::default(),
    };
    let delta = 1e-6;
    for _ in 0..sample_count.max(1) {
        let l = sampling::jump_vector(&mut rng, n);
        let e = sampling::unit_sphere(&mut rng, n);
        let alpha = sampling::log_uniform(&mut rng, 1e-3, 1e3);
        let fv = d.value(&l, &e);
        rep.nonnegativity.record((-fv).max(0.0), &l, &e, None);
        let neg_l = linalg::scale(&l, -1.0);
        let neg_e = linalg::scale(&e, -1.0);
        let fe = d.value(&neg_l, &neg_e);
        rep.evenness
            .record((fe - fv).abs() / fv.abs().max(1.0), &l, &e, None);
        let fa = d.value(&linalg::scale(&l, alpha), &e);
        let den = 1f64.max((alpha * fv).abs()).max(fa.abs());
        rep.homogeneity
            .record((fa - alpha * fv).abs() / den, &l, &e, Some(alpha));
        let dl = sampling::unit_sphere(&mut rng, n);
        let de = sampling::unit_sphere(&mut rng, n);
        let l2: Vec<f64> = l
            .iter()
            .zip(&dl)
            .map(|(a, b)| a + delta * linalg::norm(&l) * b)
            .collect();
        let e2 = linalg::normalized(&linalg::add(&e, &linalg::scale(&de, delta))).unwrap_or(e.clone());
        let fc = d.value(&l2, &e2);
        rep.continuity
            .record((fc - fv).abs() / fv.abs().max(1.0), &l, &e, None);
        rep.zero.record(d.value(&vec![0.0; n], &e).abs(), &vec![0.0; n], &e, None);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let frob = Density::frobenius(2);
        assert_eq!(frob.eval(&[3.0, 4.0], &[0.0, 1.0]).unwrap(), 5.0);
        assert_eq!(frob.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        let an = Density::weighted_aniso(vec![1.0, 3.0]);
        assert_eq!(an.eval(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 3.0);
        assert!(matches!(
            frob.eval(&[1.0, 0.0], &[1.0, 1.0]),
            Err(DensityError::NotUnit(_))
        ));
        assert!(matches!(
            frob.eval(&[1.0, 0.0, 0.0], &[1.0, 0.0]),
            Err(DensityError::Dimension { .. })
        ));
    }

    #[test]
    fn extend_bar_examples() {
        let frob = Density::frobenius(2);
        assert_eq!(frob.extend_bar(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 2.0);
        assert_eq!(frob.extend_bar(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
        let an = Density::weighted_aniso(vec![1.0, 3.0]);
        assert_eq!(an.extend_bar(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 3.0);
    }

    #[test]
    fn rank1_examples() {
        let f = linalg::outer(&[1.0, 0.0], &[0.0, 1.0]);
        let r = rank1_factor(&f, RANK1_REL_TOL).unwrap();
        assert_eq!(r.lambda, vec![1.0, 0.0]);
        assert_eq!(r.eta, vec![0.0, 1.0]);
        let z = rank1_factor(&Matrix::zeros(2, 2), RANK1_REL_TOL).unwrap();
        assert!(z.is_zero);
        let ones = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = rank1_factor(&ones, RANK1_REL_TOL).unwrap();
        let s2 = 2f64.sqrt();
        assert!((r.lambda[0] - s2).abs() < 1e-12 && (r.lambda[1] - s2).abs() < 1e-12);
        assert!((r.eta[0] - 1.0 / s2).abs() < 1e-12 && (r.eta[1] - 1.0 / s2).abs() < 1e-12);
        assert!(matches!(
            rank1_factor(&Matrix::identity(2, 2), RANK1_REL_TOL),
            Err(DensityError::NotRankOne(_))
        ));
    }

    #[test]
    fn phi_examples() {
        let frob = Density::frobenius(2);
        let f = linalg::outer(&[2.0, 0.0], &[0.0, 1.0]);
        assert_eq!(phi_extended(&frob, &f, RANK1_REL_TOL).unwrap(), 2.0);
        assert_eq!(
            phi_extended(&frob, &Matrix::identity(2, 2), RANK1_REL_TOL).unwrap(),
            f64::INFINITY
        );
        let an = Density::weighted_aniso(vec![1.0, 3.0]);
        let g = linalg::outer(&[0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(phi_extended(&an, &g, RANK1_REL_TOL).unwrap(), 3.0);
    }

    #[test]
    fn validation_examples() {
        let rep = validate(&Density::frobenius(2), 1000, 3);
        assert!(rep.max_violation() <= 1e-12, "{rep:?}");
        let broken = Density::custom(2, "broken", |l, _| linalg::norm(l) + 1.0);
        let rep = validate(&broken, 1000, 3);
        assert!(rep.homogeneity.value > 0.5);
        let an = Density::weighted_aniso(vec![1.0, 3.0]);
        assert_eq!(validate(&an, 1000, 3).evenness.value, 0.0);
    }

    #[test]
    fn json_round_trip() {
        let v = json!({"dimension": 2, "kind": "product-norm",
            "params": {"p": 2, "g": {"type": "fourier", "a0": 1.0, "cos": [0, 0, 0, 0.5]}}});
        let d = Density::from_json(&v).unwrap();
        let back = Density::from_json(&d.to_json().unwrap()).unwrap();
        let l = [0.3, -1.2];
        let e = [0.6, 0.8];
        assert_eq!(d.value(&l, &e), back.value(&l, &e));
        let bad = json!({"dimension": 2, "kind": "weighted-aniso", "params": {"w": [1]}});
        match Density::from_json(&bad) {
            Err(DensityError::Invalid { field, .. }) => assert_eq!(field, "params.w"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tabulated_interpolates_and_refuses_extrapolation() {
        let t = Table {
            lambda_angles: vec![0.0, PI / 2.0],
            eta_angles: vec![0.0, PI / 2.0],
            values: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            periodic: false,
        };
        let d = Density::tabulated(t).unwrap();
        let h = 0.5f64.sqrt();
        let v = d.eval(&[2.0 * h, 2.0 * h], &[1.0, 0.0]).unwrap();
        assert!((v - 2.0 * 2.0).abs() < 1e-12);
        assert_eq!(
            d.eval(&[-1.0, 0.0], &[1.0, 0.0]),
            Err(DensityError::Extrapolation)
        );
        assert!(!d.is_total());
    }
}
