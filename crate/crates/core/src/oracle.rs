//! Independent reference values used to cross-check the envelope solver.
//!
//! None of these routines share code with the LP or refinement path.

use crate::density::Density;

/// Nuclear norm `σ₁ + σ₂ = √(|F|² + 2|det F|)` of a 2×2 matrix given as rows.
pub fn nuclear_oracle(f: [[f64; 2]; 2]) -> f64 {
    let fro2 = f[0][0].powi(2) + f[0][1].powi(2) + f[1][0].powi(2) + f[1][1].powi(2);
    let det = f[0][0] * f[1][1] - f[0][1] * f[1][0];
    (fro2 + 2.0 * det.abs()).sqrt()
}

/// `Ψ(G) = √(|G|² − 2 det G)` for a symmetric 2×2 matrix given as rows.
pub fn psi_oracle(g: [[f64; 2]; 2]) -> f64 {
    let fro2 = g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2);
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    (fro2 - 2.0 * det).max(0.0).sqrt()
}

/// Best decomposition found by [`brute_force_two_atom`].
#[derive(Clone, Debug)]
pub struct BruteForceResult {
    pub value: f64,
    /// `(λ₁, η₁), (λ₂, η₂)`; the second pair is zero for single-atom optima.
    pub atoms: [([f64; 2], [f64; 2]); 2],
}

/// Exhaustive search over decompositions `F = λ₁⊗η₁ + λ₂⊗η₂` with `η₁, η₂`
/// on a grid of `angles` directions in `[0, π)` (the `λᵢ` are then determined
/// by `F`). Single-atom decompositions are included when `F` is rank one
/// along a grid direction.
pub fn brute_force_two_atom(d: &Density, f: [[f64; 2]; 2], angles: usize) -> BruteForceResult {
    assert_eq!(d.dimension, 2, "brute force oracle is 2-D only");
    let dirs: Vec<[f64; 2]> = (0..angles)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / angles as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let mut best = BruteForceResult {
        value: f64::INFINITY,
        atoms: [([0.0; 2], [1.0, 0.0]), ([0.0; 2], [1.0, 0.0])],
    };
    let fro = (f[0][0].powi(2) + f[0][1].powi(2) + f[1][0].powi(2) + f[1][1].powi(2)).sqrt();
    for e in &dirs {
        // F = λ ⊗ e needs F e⊥ = 0; then λ = F e.
        let perp = [-e[1], e[0]];
        let fp = [
            f[0][0] * perp[0] + f[0][1] * perp[1],
            f[1][0] * perp[0] + f[1][1] * perp[1],
        ];
        if fp[0].hypot(fp[1]) <= 1e-12 * fro.max(1.0) {
            let l = [f[0][0] * e[0] + f[0][1] * e[1], f[1][0] * e[0] + f[1][1] * e[1]];
            let v = d.value(&l, e);
            if v < best.value {
                best = BruteForceResult {
                    value: v,
                    atoms: [(l, *e), ([0.0; 2], *e)],
                };
            }
        }
    }
    for (i, e1) in dirs.iter().enumerate() {
        for e2 in dirs.iter().skip(i + 1) {
            // F = [λ₁ λ₂] Hᵀ with H = [η₁ η₂]  ⇒  [λ₁ λ₂] = F H⁻ᵀ.
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            if det.abs() < 1e-12 {
                continue;
            }
            // H⁻ᵀ = (1/det) [[e2y, -e1y], [-e2x, e1x]]
            let hit = [[e2[1] / det, -e1[1] / det], [-e2[0] / det, e1[0] / det]];
            let mut l1 = [0.0; 2];
            let mut l2 = [0.0; 2];
            for r in 0..2 {
                l1[r] = f[r][0] * hit[0][0] + f[r][1] * hit[1][0];
                l2[r] = f[r][0] * hit[0][1] + f[r][1] * hit[1][1];
            }
            let v = d.value(&l1, e1) + d.value(&l2, e2);
            if v < best.value {
                best = BruteForceResult {
                    value: v,
                    atoms: [(l1, *e1), (l2, *e2)],
                };
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nuclear_examples() {
        assert_eq!(nuclear_oracle([[1.0, 0.0], [0.0, 1.0]]), 2.0);
        assert_eq!(nuclear_oracle([[0.0, -1.0], [1.0, 0.0]]), 2.0);
        assert_eq!(nuclear_oracle([[3.0, 0.0], [0.0, 0.0]]), 3.0);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_oracle([[0.0, 0.5], [0.5, 0.0]]), 1.0);
        assert_eq!(psi_oracle([[1.0, 0.0], [0.0, 1.0]]), 0.0);
        assert_eq!(psi_oracle([[1.0, 0.0], [0.0, -1.0]]), 2.0);
    }

    #[test]
    fn brute_force_reproduces_two_atom_decomposition() {
        let frob = Density::frobenius(2);
        let r = brute_force_two_atom(&frob, [[1.0, 0.0], [0.0, 1.0]], 8);
        assert!((r.value - 2.0).abs() < 1e-12);
        let m = [
            r.atoms[0].0[0] * r.atoms[0].1[0] + r.atoms[1].0[0] * r.atoms[1].1[0],
            r.atoms[0].0[1] * r.atoms[0].1[1] + r.atoms[1].0[1] * r.atoms[1].1[1],
        ];
        assert!((m[0] - 1.0).abs() < 1e-12 && (m[1] - 1.0).abs() < 1e-12);
    }
}
