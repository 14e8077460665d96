//! Dense revised simplex for `min cᵀx  s.t.  A x = b, x ≥ 0`.
//!
//! The row count is tiny (n² ≤ 16) while the column count can reach a few
//! hundred thousand, so the basis is refactored from scratch every pivot and
//! all the work is in pricing. Pricing uses the most negative reduced cost and
//! switches to Bland's lowest-index rule after a run of degenerate pivots;
//! ratio-test ties always go to the lowest variable index.

use thiserror::Error;

use crate::linalg::solve_dense;
use crate::tolerances::{LP_PIVOT_TOL, LP_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("infeasible: phase-one residual {0:e}")]
    Infeasible(f64),
    #[error("iteration limit of {0} pivots exceeded")]
    IterationLimit(usize),
    #[error("basis became numerically singular")]
    Singular,
}

/// Column-major constraint data: column `j` is `a[j*m .. (j+1)*m]`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub m: usize,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Basic variables with positive value, sorted by column index.
    pub x: Vec<(usize, f64)>,
    pub objective: f64,
    /// Optimal dual vector `y` with `c_j − yᵀa_j ≥ −tol` for every column.
    pub duals: Vec<f64>,
    /// `min_j (c_j − yᵀ a_j)` over all columns.
    pub min_reduced_cost: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tol: LP_TOL,
            max_iterations: 100_000,
            bland_after: 50,
        }
    }
}

impl LpProblem {
    pub fn ncols(&self) -> usize {
        self.c.len()
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.a[j * self.m..(j + 1) * self.m]
    }
}

struct State<'p> {
    p: &'p LpProblem,
    /// Sign of the artificial column for each row.
    art_sign: Vec<f64>,
    basis: Vec<usize>,
    x_b: Vec<f64>,
    iterations: usize,
}

impl<'p> State<'p> {
    fn n(&self) -> usize {
        self.p.ncols()
    }

    fn is_art(&self, j: usize) -> bool {
        j >= self.n()
    }

    fn col_into(&self, j: usize, out: &mut [f64]) {
        if self.is_art(j) {
            out.iter_mut().for_each(|v| *v = 0.0);
            let r = j - self.n();
            out[r] = self.art_sign[r];
        } else {
            out.copy_from_slice(self.p.column(j));
        }
    }

    /// Row-major basis matrix.
    fn basis_matrix(&self) -> Vec<f64> {
        let m = self.p.m;
        let mut bm = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            self.col_into(j, &mut col);
            for i in 0..m {
                bm[i * m + k] = col[i];
            }
        }
        bm
    }

    fn transpose(bm: &[f64], m: usize) -> Vec<f64> {
        let mut t = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                t[k * m + i] = bm[i * m + k];
            }
        }
        t
    }

    fn recompute_x(&mut self) -> Result<(), LpError> {
        let m = self.p.m;
        let bm = self.basis_matrix();
        self.x_b = solve_dense(&bm, &self.p.b, m, LP_PIVOT_TOL).ok_or(LpError::Singular)?;
        Ok(())
    }

    /// Runs simplex pivots for the given cost function until optimal.
    fn optimize(
        &mut self,
        cost: &dyn Fn(usize) -> f64,
        allow_art: bool,
        opts: &LpOptions,
    ) -> Result<Vec<f64>, LpError> {
        let m = self.p.m;
        let n = self.n();
        let mut degenerate_run = 0usize;
        let mut col = vec![0.0; m];
        loop {
            let bm = self.basis_matrix();
            let cb: Vec<f64> = self.basis.iter().map(|&j| cost(j)).collect();
            let y = solve_dense(&Self::transpose(&bm, m), &cb, m, LP_PIVOT_TOL)
                .ok_or(LpError::Singular)?;
            let bland = degenerate_run >= opts.bland_after;
            let in_basis = {
                let mut flags = vec![false; n + m];
                self.basis.iter().for_each(|&j| flags[j] = true);
                flags
            };
            let total = if allow_art { n + m } else { n };
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..total {
                if in_basis[j] {
                    continue;
                }
                let d = if j < n {
                    let a = self.p.column(j);
                    cost(j) - a.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>()
                } else {
                    cost(j) - self.art_sign[j - n] * y[j - n]
                };
                if d < -opts.tol {
                    match entering {
                        None => entering = Some((j, d)),
                        Some((_, best)) if !bland && d < best => entering = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(y);
            };
            if self.iterations >= opts.max_iterations {
                return Err(LpError::IterationLimit(opts.max_iterations));
            }
            self.iterations += 1;
            self.col_into(q, &mut col);
            let u = solve_dense(&bm, &col, m, LP_PIVOT_TOL).ok_or(LpError::Singular)?;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if u[r] > LP_PIVOT_TOL {
                    let ratio = self.x_b[r].max(0.0) / u[r];
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, best)) => {
                            let tie = (ratio - best).abs() <= 1e-14 * best.abs().max(1.0);
                            if ratio < best && !tie
                                || tie && self.basis[r] < self.basis[lr]
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            // Costs are bounded below in both phases, so an unbounded ray
            // only appears through round-off; treat it as a singular basis.
            let (r, theta) = leave.ok_or(LpError::Singular)?;
            degenerate_run = if theta <= opts.tol { degenerate_run + 1 } else { 0 };
            self.basis[r] = q;
            self.recompute_x()?;
        }
    }
}

/// Solves the LP from scratch (two-phase) or from `warm_start` columns.
pub fn solve(
    p: &LpProblem,
    warm_start: Option<&[usize]>,
    opts: &LpOptions,
) -> Result<LpSolution, LpError> {
    let m = p.m;
    let n = p.ncols();
    let art_sign: Vec<f64> = p.b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let cold: Vec<usize> = (n..n + m).collect();
    let mut st = State {
        p,
        art_sign,
        basis: cold.clone(),
        x_b: vec![],
        iterations: 0,
    };
    if let Some(ws) = warm_start {
        if let Some(basis) = warm_basis(&st, ws) {
            st.basis = basis;
            match st.recompute_x() {
                Ok(()) if st.x_b.iter().all(|v| *v >= -opts.tol) => {}
                _ => st.basis = cold.clone(),
            }
        }
    }
    if st.basis == cold {
        st.recompute_x()?;
    }
    let b_scale = p.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if st.basis.iter().any(|&j| j >= n) {
        st.optimize(&|j| if j >= n { 1.0 } else { 0.0 }, true, opts)?;
        let infeas: f64 = st
            .basis
            .iter()
            .zip(&st.x_b)
            .filter(|(j, _)| **j >= n)
            .map(|(_, x)| x.max(0.0))
            .sum();
        if infeas > opts.tol * b_scale * (m as f64) {
            return Err(LpError::Infeasible(infeas));
        }
        drive_out_artificials(&mut st)?;
    }
    let y = st.optimize(&|j| if j >= n { 0.0 } else { p.c[j] }, false, opts)?;
    let floor = 1e-14 * p.b.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    let mut x: Vec<(usize, f64)> = st
        .basis
        .iter()
        .zip(&st.x_b)
        .filter(|(j, v)| **j < n && **v > floor)
        .map(|(j, v)| (*j, *v))
        .collect();
    x.sort_by_key(|e| e.0);
    let objective = x.iter().map(|(j, v)| p.c[*j] * v).sum();
    let min_reduced_cost = (0..n)
        .map(|j| p.c[j] - p.column(j).iter().zip(&y).map(|(a, y)| a * y).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(LpSolution {
        x,
        objective,
        duals: y,
        min_reduced_cost,
        iterations: st.iterations,
    })
}

/// Completes the requested columns to a nonsingular basis with artificials.
fn warm_basis(st: &State<'_>, ws: &[usize]) -> Option<Vec<usize>> {
    let m = st.p.m;
    let n = st.n();
    let mut chosen: Vec<usize> = vec![];
    for &j in ws {
        if j < n && !chosen.contains(&j) && chosen.len() < m {
            chosen.push(j);
            if !independent(st, &chosen) {
                chosen.pop();
            }
        }
    }
    for r in 0..m {
        if chosen.len() == m {
            break;
        }
        chosen.push(n + r);
        if !independent(st, &chosen) {
            chosen.pop();
        }
    }
    (chosen.len() == m).then_some(chosen)
}

/// Rank test of the chosen columns by Gram–Schmidt.
fn independent(st: &State<'_>, cols: &[usize]) -> bool {
    let m = st.p.m;
    let mut q: Vec<Vec<f64>> = vec![];
    let mut v = vec![0.0; m];
    for &j in cols {
        st.col_into(j, &mut v);
        let nv0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut w = v.clone();
        for qi in &q {
            let d: f64 = w.iter().zip(qi).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(qi).for_each(|(a, b)| *a -= d * b);
        }
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw <= 1e-9 * nv0.max(1e-300) {
            return false;
        }
        q.push(w.into_iter().map(|x| x / nw).collect());
    }
    true
}

/// After phase one, pivots zero-level artificials out where possible.
fn drive_out_artificials(st: &mut State<'_>) -> Result<(), LpError> {
    let m = st.p.m;
    let n = st.n();
    let mut col = vec![0.0; m];
    for r in 0..m {
        if st.basis[r] < n {
            continue;
        }
        let bm = st.basis_matrix();
        let mut replaced = false;
        for j in 0..n {
            if st.basis.contains(&j) {
                continue;
            }
            st.col_into(j, &mut col);
            if let Some(u) = solve_dense(&bm, &col, m, LP_PIVOT_TOL) {
                if u[r].abs() > 1e-7 {
                    st.basis[r] = j;
                    st.recompute_x()?;
                    replaced = true;
                    break;
                }
            }
        }
        if !replaced {
            // Redundant row: the artificial stays basic at level zero and
            // never re-enters because phase two prices only real columns.
            st.x_b[r] = st.x_b[r].max(0.0);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(cols: &[&[f64]], c: &[f64], b: &[f64]) -> LpProblem {
        LpProblem {
            m: b.len(),
            a: cols.iter().flat_map(|c| c.iter().copied()).collect(),
            c: c.to_vec(),
            b: b.to_vec(),
        }
    }

    #[test]
    fn small_lp_optimum_and_duals() {
        // min x0 + 2 x1 + 3 x2  s.t. x0 + x2 = 1, x1 + x2 = 1
        let p = problem(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]], &[1.0, 2.0, 2.5], &[1.0, 1.0]);
        let s = solve(&p, None, &LpOptions::default()).unwrap();
        assert!((s.objective - 2.5).abs() < 1e-12);
        let dual_obj: f64 = s.duals.iter().zip(&p.b).map(|(y, b)| y * b).sum();
        assert!((dual_obj - s.objective).abs() < 1e-12);
        assert!(s.min_reduced_cost >= -1e-12);
    }

    #[test]
    fn negative_rhs_and_infeasibility() {
        let p = problem(&[&[1.0], &[-1.0]], &[1.0, 3.0], &[-2.0]);
        let s = solve(&p, None, &LpOptions::default()).unwrap();
        assert!((s.objective - 6.0).abs() < 1e-12);
        let q = problem(&[&[1.0]], &[1.0], &[-2.0]);
        assert!(matches!(
            solve(&q, None, &LpOptions::default()),
            Err(LpError::Infeasible(_))
        ));
    }

    #[test]
    fn warm_start_matches_cold() {
        let p = problem(
            &[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, -1.0]],
            &[1.0, 1.0, 1.5, 0.1],
            &[2.0, 1.0],
        );
        let cold = solve(&p, None, &LpOptions::default()).unwrap();
        let warm = solve(&p, Some(&[2]), &LpOptions::default()).unwrap();
        assert!((cold.objective - warm.objective).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let p = problem(&[&[1.0, 1.0], &[2.0, 2.0]], &[1.0, 1.0], &[2.0, 2.0]);
        let s = solve(&p, None, &LpOptions::default()).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }
}
