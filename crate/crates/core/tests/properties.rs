//! Property-based tests of the invariants.

use proptest::prelude::*;
use surfenv::checkers;
use surfenv::constructions;
use surfenv::density::Density;
use surfenv::envelope::{self, AtomDictionary};
use surfenv::fields::{self, PartitionField};
use surfenv::geometry;
use surfenv::linalg::{self, Matrix};
use surfenv::lp::{self, LpOptions, LpProblem};
use surfenv::oracle;
use surfenv::quadrature;

fn unit2() -> impl Strategy<Value = [f64; 2]> {
    (0.0..std::f64::consts::TAU).prop_map(|t| [t.cos(), t.sin()])
}

fn vec2(r: f64) -> impl Strategy<Value = [f64; 2]> {
    (-r..r, -r..r).prop_map(|(a, b)| [a, b])
}

fn densities() -> Vec<Density> {
    vec![
        Density::frobenius(2),
        Density::weighted_aniso(vec![1.0, 3.0]),
        Density::p_norm(2, 1.0),
    ]
}

fn dict(d: &Density) -> AtomDictionary {
    envelope::sample_dictionary(d, 32, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_homogeneous_and_even(l in vec2(5.0), e in unit2(), a in 0.01f64..100.0, which in 0usize..3) {
        let d = &densities()[which];
        let v = d.value(&l, &e);
        prop_assert!((d.value(&linalg::scale(&l, a), &e) - a * v).abs() <= 1e-12 * (1.0 + a * v));
        let nl = linalg::scale(&l, -1.0);
        let ne = linalg::scale(&e, -1.0);
        prop_assert!((d.value(&nl, &ne) - v).abs() <= 1e-12 * (1.0 + v));
    }

    #[test]
    fn lp_weak_duality(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = 3;
        let ncols = 12;
        let a: Vec<f64> = (0..m * ncols).map(|_| r.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..ncols).map(|_| r.gen_range(0.1..2.0)).collect();
        let x0: Vec<f64> = (0..ncols).map(|_| r.gen_range(0.0..1.0)).collect();
        let mut b = vec![0.0; m];
        for j in 0..ncols {
            for i in 0..m {
                b[i] += a[j * m + i] * x0[j];
            }
        }
        let p = LpProblem { m, a: a.clone(), c: c.clone(), b: b.clone() };
        let s = lp::solve(&p, None, &LpOptions::default()).unwrap();
        let feasible_cost: f64 = c.iter().zip(&x0).map(|(c, x)| c * x).sum();
        prop_assert!(s.objective <= feasible_cost + 1e-9);
        let dual_obj: f64 = s.duals.iter().zip(&b).map(|(y, b)| y * b).sum();
        prop_assert!((s.objective - dual_obj).abs() <= 1e-8 * (1.0 + s.objective.abs()));
        prop_assert!(s.min_reduced_cost >= -1e-9);
        let mut ax = vec![0.0; m];
        for (j, x) in &s.x {
            prop_assert!(*x >= 0.0);
            for i in 0..m {
                ax[i] += a[j * m + i] * x;
            }
        }
        for i in 0..m {
            prop_assert!((ax[i] - b[i]).abs() <= 1e-9 * (1.0 + b[i].abs()));
        }
    }

    #[test]
    fn quadrature_of_affine_jump_norm(a in 0.0f64..1.0, c in 1.0f64..100.0) {
        // |(1, c(x − a))|, the shape of a Frobenius edge integrand.
        let g = |x: f64| (1.0 + c * c * (x - a) * (x - a)).sqrt();
        let prim = |u: f64| 0.5 * u * (1.0 + c * c * u * u).sqrt() + (c * u).asinh() / (2.0 * c);
        let exact = prim(1.0 - a) - prim(-a);
        let q = quadrature::integrate(&g, 0.0, 1.0, 1e-10, 40).unwrap();
        prop_assert!((q.value - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn quadrature_split_at_kink(a in 0.0f64..1.0) {
        let g = |x: f64| (x - a).abs();
        let q = quadrature::integrate(&g, 0.0, a, 1e-10, 40).unwrap().value
            + quadrature::integrate(&g, a, 1.0, 1e-10, 40).unwrap().value;
        let exact = 0.5 * (a * a + (1.0 - a) * (1.0 - a));
        prop_assert!((q - exact).abs() <= 1e-12);
    }

    #[test]
    fn clipping_conserves_area(n in unit2(), c in -0.7f64..0.7) {
        let sq = vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
        let lo = geometry::clip_halfplane(&sq, n, c);
        let hi = geometry::clip_halfplane(&sq, [-n[0], -n[1]], -c);
        let area = |p: &Vec<[f64; 2]>| if p.len() < 3 { 0.0 } else { geometry::signed_area(p) };
        prop_assert!((area(&lo) + area(&hi) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn elementary_jump_energy(l in vec2(4.0), e in unit2(), which in 0usize..3) {
        let d = &densities()[which];
        let f = PartitionField::elementary(l, e).unwrap();
        let en = fields::total_energy(d, &f, 1e-10).unwrap().total;
        prop_assert!((en - d.value(&l, &e)).abs() <= 1e-12 * (1.0 + en));
    }

    #[test]
    fn strip_field_matches_closed_form(l in vec2(3.0), x in vec2(3.0), e in unit2(), k in 3usize..20, which in 0usize..3) {
        let d = &densities()[which];
        let c = constructions::subadditivity_strip(&l, &x, &e, k).unwrap();
        let en = fields::total_energy(d, &c.field().unwrap(), 1e-10).unwrap().total;
        prop_assert!((en - c.closed_form(d)).abs() <= 1e-10 * (1.0 + en));
    }

    #[test]
    fn exact_families_converge_at_rate(l in vec2(3.0), x in vec2(3.0), e in unit2(), e1 in vec2(2.0), e2 in vec2(2.0), k in 3usize..200) {
        let d = Density::frobenius(2);
        let strip = constructions::subadditivity_strip(&l, &x, &e, k).unwrap();
        let gap = (strip.closed_form(&d) - strip.limit(&d)).abs();
        prop_assert!(gap <= strip.rate_constant(&d) / k as f64 + 1e-12);
        if let Ok(t) = constructions::eta_convexity_triangles(&l, &e1, &e2, k) {
            let gap = (t.closed_form(&d) - t.limit(&d)).abs();
            prop_assert!(gap <= t.rate_constant(&d) / k as f64 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn envelope_lp_properties(f in prop::array::uniform4(-3.0f64..3.0), a in 0.1f64..10.0, which in 0usize..3) {
        let d = &densities()[which];
        let dict = dict(d);
        let m = Matrix::from_row_slice(2, 2, &f);
        let r = envelope::envelope_lp(d, &m, &dict).unwrap();
        let ra = envelope::envelope_lp(d, &(&m * a), &dict).unwrap();
        prop_assert!((ra.value - a * r.value).abs() <= 1e-9 * (1.0 + a * r.value));
        prop_assert!(r.gap >= -1e-10);
        prop_assert!(r.decomposition.terms.len() <= 5);
        prop_assert!(r.decomposition.residual <= 1e-8 * (1.0 + m.norm()));
        prop_assert!((r.decomposition.cost(d) - r.value).abs() <= 1e-9 * (1.0 + r.value));
    }

    #[test]
    fn frobenius_envelope_brackets_nuclear(f in prop::array::uniform4(-3.0f64..3.0)) {
        let d = Density::frobenius(2);
        let m = Matrix::from_row_slice(2, 2, &f);
        let nuc = oracle::nuclear_oracle([[f[0], f[1]], [f[2], f[3]]]);
        let r = envelope::envelope_lp(&d, &m, &dict(&d)).unwrap();
        prop_assert!(r.value >= nuc - 1e-9);
        // Y is feasible on the sampled atoms only; rescaled by its largest
        // singular value it is feasible for every atom.
        let smax = linalg::singular_values(&r.certificate.y)[0];
        prop_assert!(r.lower_bound <= smax.max(1.0) * nuc + 1e-9);
        let refined = envelope::envelope_refined_full(&d, &m, &dict(&d), 20).unwrap();
        prop_assert!(refined.value <= r.value + 1e-9);
    }

    #[test]
    fn rank_one_envelope_below_density(l in vec2(3.0), e in unit2(), which in 0usize..3) {
        let d = &densities()[which];
        let dict = dict(d);
        let f = d.value(&l, &e);
        let bv = envelope::bv_envelope(d, &l, &e, &dict, 5).unwrap();
        let bd = envelope::bd_envelope(d, &l, &e, &dict, 5).unwrap();
        prop_assert!(bv.value <= f + 1e-9 * (1.0 + f));
        prop_assert!(bd.value <= f + 1e-9 * (1.0 + f));
    }

    #[test]
    fn symmetry_field_within_valid_bound(l in unit2(), e in unit2(), half in 2usize..4) {
        let k = 2 * half;
        let d = Density::frobenius(2);
        let Ok(c) = constructions::symmetry_triangles(&l, &e, k) else { return Ok(()) };
        let Ok(field) = c.field() else { return Ok(()) };
        let en = fields::total_energy(&d, &field, 1e-9).unwrap().total;
        prop_assert!(en <= c.valid_bound_at(&d, k) + 1e-6);
        prop_assert!(en >= d.value(&l, &e) - 1e-9);
    }

    #[test]
    fn checker_reports_deterministic(seed in 0u64..10_000) {
        let d = Density::p_norm(2, 1.0);
        let a = checkers::check_subadditivity(&d, 40, seed).unwrap();
        let b = checkers::check_subadditivity(&d, 40, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let a = checkers::check_eta_convexity(&d, 40, seed).unwrap();
        let b = checkers::check_eta_convexity(&d, 40, seed).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn bd_violation_implies_bd_check_violated(w1 in 0.5f64..4.0, w2 in 0.5f64..4.0) {
        let d = Density::weighted_aniso(vec![w1, w2]);
        let dict = envelope::sample_dictionary(&d, 8, 0).unwrap();
        let sym = checkers::check_bd_symmetry(&d, 10, 0).unwrap();
        let bd = checkers::check_bd_ellipticity(&d, 10, &dict, 0, 0).unwrap();
        if sym.violated() {
            prop_assert!(bd.violated());
            prop_assert!(checkers::recheck(&d, bd.witness().unwrap()));
        }
    }
}
