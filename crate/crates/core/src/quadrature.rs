//! Adaptive 7-point Gauss–Legendre quadrature on intervals.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not reach tolerance {tol:e} within depth {depth} (estimate {estimate:e})")]
pub struct QuadratureError {
    pub tol: f64,
    pub depth: usize,
    pub estimate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of `|S(halves) − S(whole)|` over accepted subintervals.
    pub error: f64,
    pub evaluations: usize,
}

const NODES: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_2,
    0.0,
    0.405_845_151_377_397_2,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];
const WEIGHTS: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

/// Single 7-point Gauss–Legendre panel on `[a, b]`.
pub fn gauss7(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    h * NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(x, w)| w * g(m + h * x))
        .sum::<f64>()
}

/// Panels the interval is split into before adaptive bisection starts, so a
/// whole-versus-halves coincidence on `[a, b]` cannot end the recursion.
const INITIAL_PANELS: usize = 8;

/// Integrates `g` over `[a, b]` to absolute tolerance `tol`, bisecting panels
/// whose two-half estimate differs from the whole-panel estimate by more
/// than their share of `tol`.
pub fn integrate(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> Result<Quadrature, QuadratureError> {
    let mut out = Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 7,
    };
    if a == b {
        return Ok(out);
    }
    let h = (b - a) / INITIAL_PANELS as f64;
    let share = tol / INITIAL_PANELS as f64;
    out.evaluations = 0;
    for i in 0..INITIAL_PANELS {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == INITIAL_PANELS { b } else { lo + h };
        let whole = gauss7(g, lo, hi);
        out.evaluations += 7;
        recurse(g, lo, hi, whole, share, 0, max_depth, &mut out)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    g: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    max_depth: usize,
    out: &mut Quadrature,
) -> Result<(), QuadratureError> {
    let m = 0.5 * (a + b);
    let left = gauss7(g, a, m);
    let right = gauss7(g, m, b);
    out.evaluations += 14;
    let diff = (left + right - whole).abs();
    if diff <= tol || (b - a).abs() < 1e-15 {
        out.value += left + right;
        out.error += diff;
        return Ok(());
    }
    if depth >= max_depth {
        return Err(QuadratureError {
            tol,
            depth,
            estimate: diff,
        });
    }
    recurse(g, a, m, left, 0.5 * tol, depth + 1, max_depth, out)?;
    recurse(g, m, b, right, 0.5 * tol, depth + 1, max_depth, out)
}

/// Midpoint and trapezoid sums on `pieces` equal panels. For convex `g`
/// these bracket the integral: `midpoint ≤ ∫ g ≤ trapezoid`.
pub fn convex_bracket(g: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> (f64, f64) {
    let h = (b - a) / pieces as f64;
    let mut mid = 0.0;
    let mut trap = 0.0;
    let mut prev = g(a);
    for i in 0..pieces {
        let x0 = a + i as f64 * h;
        let next = g(x0 + h);
        mid += h * g(x0 + 0.5 * h);
        trap += 0.5 * h * (prev + next);
        prev = next;
    }
    (mid, trap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let q = integrate(&|x| x.powi(13) + 3.0 * x * x, 0.0, 1.0, 1e-12, 30).unwrap();
        assert!((q.value - (1.0 / 14.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn kink_integrates() {
        let q = integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10, 40).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn bracket_orders() {
        let (m, t) = convex_bracket(&|x: f64| x * x, 0.0, 1.0, 10);
        assert!(m <= 1.0 / 3.0 && 1.0 / 3.0 <= t);
    }
}
