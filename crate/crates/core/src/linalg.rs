//! Small dense linear-algebra helpers on `nalgebra` matrices and plain slices.

use nalgebra::DMatrix;

/// Square real matrix, stored by `nalgebra`.
pub type Matrix = DMatrix<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns `a / |a|`, or `None` for the zero vector.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let r = norm(a);
    if r == 0.0 || !r.is_finite() {
        return None;
    }
    Some(a.iter().map(|x| x / r).collect())
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a ⊗ b` with entries `a_i b_j`.
pub fn outer(a: &[f64], b: &[f64]) -> Matrix {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

/// `a ⊙ b = (a ⊗ b + b ⊗ a) / 2`.
pub fn sym_outer(a: &[f64], b: &[f64]) -> Matrix {
    sym(&outer(a, b))
}

pub fn sym(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Frobenius inner product `A : B`.
pub fn frob_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Builds a matrix from row-major nested vectors.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return None;
    }
    Some(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Singular values of a 2×2 matrix `[[a, b], [c, d]]`, descending.
///
/// Uses `σ₁ ± σ₂ = √((a ± d)² + (c ∓ b)²)`.
pub fn singular_values_2x2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let s_plus = (a + d).hypot(c - b);
    let s_minus = (a - d).hypot(c + b);
    (0.5 * (s_plus + s_minus), 0.5 * (s_plus - s_minus).abs())
}

/// Singular values in descending order; closed form for 2×2.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 2 && m.ncols() == 2 {
        let (s1, s2) = singular_values_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        return vec![s1, s2];
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Solves the dense `m × m` system `A x = b` (row-major `a`) by Gaussian
/// elimination with partial pivoting. Returns `None` when a pivot falls
/// below `pivot_tol` times the largest entry of its column.
pub fn solve_dense(a: &[f64], b: &[f64], m: usize, pivot_tol: f64) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..m {
        let (piv, pval) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .max_by(|p, q| p.1.total_cmp(&q.1))?;
        if pval <= pivot_tol * scale {
            return None;
        }
        if piv != col {
            for j in 0..m {
                a.swap(piv * m + j, col * m + j);
            }
            x.swap(piv, col);
        }
        let d = a[col * m + col];
        for r in col + 1..m {
            let factor = a[r * m + col] / d;
            if factor != 0.0 {
                for j in col..m {
                    a[r * m + j] -= factor * a[col * m + j];
                }
                x[r] -= factor * x[col];
            }
        }
    }
    for col in (0..m).rev() {
        let mut s = x[col];
        for j in col + 1..m {
            s -= a[col * m + j] * x[j];
        }
        x[col] = s / a[col * m + col];
    }
    Some(x)
}

/// Rotation matrix `T` with `T e₂ = η` (2-D), returned as rows.
pub fn frame_2d(eta: [f64; 2]) -> [[f64; 2]; 2] {
    [[eta[1], eta[0]], [-eta[0], eta[1]]]
}

pub fn apply_2d(t: &[[f64; 2]; 2], x: [f64; 2]) -> [f64; 2] {
    [t[0][0] * x[0] + t[0][1] * x[1], t[1][0] * x[0] + t[1][1] * x[1]]
}

pub fn apply_2d_transpose(t: &[[f64; 2]; 2], x: [f64; 2]) -> [f64; 2] {
    [t[0][0] * x[0] + t[1][0] * x[1], t[0][1] * x[0] + t[1][1] * x[1]]
}

/// Counter-clockwise quarter turn `R = [[0, −1], [1, 0]]`.
pub fn rot90(x: [f64; 2]) -> [f64; 2] {
    [-x[1], x[0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_svd_matches_nalgebra() {
        let m = DMatrix::from_row_slice(2, 2, &[1.5, -0.3, 2.0, 0.7]);
        let (s1, s2) = singular_values_2x2(1.5, -0.3, 2.0, 0.7);
        let reference = m.singular_values();
        let mut r: Vec<f64> = reference.iter().copied().collect();
        r.sort_by(|a, b| b.total_cmp(a));
        assert!((s1 - r[0]).abs() < 1e-12);
        assert!((s2 - r[1]).abs() < 1e-12);
    }

    #[test]
    fn solve_small_system() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let x = solve_dense(&a, &[3.0, 5.0], 2, 1e-14).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve_dense(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2, 1e-12).is_none());
    }

    #[test]
    fn frame_maps_e2_to_eta() {
        let eta = [0.6, 0.8];
        let t = frame_2d(eta);
        let y = apply_2d(&t, [0.0, 1.0]);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        let back = apply_2d_transpose(&t, y);
        assert!(back[0].abs() < 1e-15 && (back[1] - 1.0).abs() < 1e-15);
    }
}
