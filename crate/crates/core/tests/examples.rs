//! Worked examples across the library modules.

use surfenv::checkers::{self, CheckSettings, TestKind};
use surfenv::constructions::{self, Family};
use surfenv::density::{self, Density};
use surfenv::envelope::{self, Mode};
use surfenv::fields::{self, JumpEdge, PartitionField, RigidCell};
use surfenv::linalg::{self, Matrix};
use surfenv::oracle;

fn frob() -> Density {
    Density::frobenius(2)
}

fn aniso() -> Density {
    Density::weighted_aniso(vec![1.0, 3.0])
}

fn energy(d: &Density, f: &PartitionField) -> f64 {
    fields::total_energy(d, f, 1e-10).unwrap().total
}

#[test]
fn density_rank_one_and_extension() {
    let r = density::rank1_factor(&Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]), 1e-9).unwrap();
    let s = 2f64.sqrt();
    assert!((r.lambda[0] - s).abs() < 1e-12 && (r.lambda[1] - s).abs() < 1e-12);
    assert!((r.eta[0] - 1.0 / s).abs() < 1e-12 && (r.eta[1] - 1.0 / s).abs() < 1e-12);
    let id = Matrix::identity(2, 2);
    assert_eq!(density::phi_extended(&frob(), &id, 1e-9).unwrap(), f64::INFINITY);
    let f = linalg::outer(&[0.0, 1.0], &[1.0, 0.0]);
    assert!((density::phi_extended(&aniso(), &f, 1e-9).unwrap() - 3.0).abs() < 1e-12);
    assert!((aniso().bar(&[1.0, 0.0], &[0.0, 3.0]) - 3.0).abs() < 1e-12);
    assert_eq!(frob().bar(&[1.0, 1.0], &[0.0, 0.0]), 0.0);
}

#[test]
fn broken_density_fails_homogeneity() {
    let d = Density::custom(2, "affine", |l, _| linalg::norm(l) + 1.0);
    let rep = density::validate(&d, 500, 3);
    assert!(rep.homogeneity.value > 0.5, "{}", rep.homogeneity.value);
    let rep = density::validate(&aniso(), 1000, 3);
    assert_eq!(rep.evenness.value, 0.0);
}

#[test]
fn dictionary_is_deterministic() {
    let a = envelope::sample_dictionary(&aniso(), 12, 5).unwrap();
    let b = envelope::sample_dictionary(&aniso(), 12, 5).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let d = envelope::sample_dictionary(&frob(), 360, 0).unwrap();
    assert!(d.atoms.iter().all(|a| (a.value - 1.0).abs() < 1e-12));
}

#[test]
fn envelope_matches_nuclear_oracle() {
    let dict = envelope::sample_dictionary(&frob(), 360, 0).unwrap();
    let id = Matrix::identity(2, 2);
    let r = envelope::envelope_lp(&frob(), &id, &dict).unwrap();
    assert!((2.0..=2.01).contains(&r.value), "{}", r.value);
    let dict16 = envelope::sample_dictionary(&frob(), 16, 0).unwrap();
    let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let r = envelope::envelope_refined_full(&frob(), &rot, &dict16, 20).unwrap();
    assert!((r.value - oracle::nuclear_oracle([[0.0, -1.0], [1.0, 0.0]])).abs() < 1e-4);
}

#[test]
fn aniso_bv_envelope_against_brute_force() {
    let d = aniso();
    let brute = oracle::brute_force_two_atom(&d, [[0.0, 0.0], [1.0, 0.0]], 90);
    let dict = envelope::sample_dictionary(&d, 32, 0).unwrap();
    let r = envelope::bv_envelope(&d, &[0.0, 1.0], &[1.0, 0.0], &dict, 20).unwrap();
    assert!(r.value <= brute.value + 1e-6, "{} vs {}", r.value, brute.value);
    assert!(r.value <= 3.0 + 1e-9);
}

#[test]
fn symmetric_envelope_over_swapped_atoms() {
    let d = aniso();
    let atoms = vec![(vec![1.0, 0.0], vec![0.0, 1.0])];
    let g = linalg::sym_outer(&[0.0, 1.0], &[1.0, 0.0]);
    let r = envelope::envelope_over_atoms(&d, &g, &atoms, Mode::Symmetric).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);
    assert!(r.decomposition.residual_in(Mode::Symmetric) < 1e-12);
}

#[test]
fn partition_errors() {
    let short = vec![
        RigidCell::constant(vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.0], [-0.5, 0.0]], [0.0, 0.0]),
        RigidCell::constant(vec![[-0.5, 0.0], [0.5, 0.0], [0.5, 0.4], [-0.5, 0.4]], [1.0, 0.0]),
    ];
    assert!(matches!(
        fields::build_partition(short, [0.0, 1.0], [1.0, 0.0]),
        Err(fields::FieldError::Gap { .. })
    ));
    let wrong = vec![
        RigidCell::constant(vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.0], [-0.5, 0.0]], [0.0, 0.0]),
        RigidCell::constant(vec![[-0.5, 0.0], [0.5, 0.0], [0.5, 0.5], [-0.5, 0.5]], [2.0, 0.0]),
    ];
    assert!(matches!(
        fields::build_partition(wrong, [0.0, 1.0], [1.0, 0.0]),
        Err(fields::FieldError::BoundaryMismatch { .. })
    ));
}

#[test]
fn elementary_field_single_midline_edge() {
    let f = PartitionField::elementary([0.3, -0.7], [0.6, 0.8]).unwrap();
    let edges = fields::extract_jump_edges(&f);
    assert_eq!(edges.len(), 1);
    let e = &edges[0];
    assert!((e.length() - 1.0).abs() < 1e-12);
    let dot = e.normal[0] * 0.6 + e.normal[1] * 0.8;
    assert!((dot.abs() - 1.0).abs() < 1e-12);
    let j = if dot > 0.0 { e.jump_p } else { [-e.jump_p[0], -e.jump_p[1]] };
    assert!((j[0] - 0.3).abs() < 1e-12 && (j[1] + 0.7).abs() < 1e-12);
}

#[test]
fn edge_energy_sign_invariance() {
    for d in [frob(), aniso(), Density::p_norm(2, 3.0)] {
        let e = JumpEdge {
            p: [0.1, -0.2],
            q: [0.3, 0.25],
            normal: [0.9138115486202573, -0.40613846605344767],
            left: 0,
            right: 1,
            jump_p: [1.0, -2.0],
            jump_q: [0.5, 0.7],
        };
        let mut flipped = e.clone();
        flipped.normal = [-e.normal[0], -e.normal[1]];
        flipped.jump_p = [-e.jump_p[0], -e.jump_p[1]];
        flipped.jump_q = [-e.jump_q[0], -e.jump_q[1]];
        let a = fields::edge_energy(&d, &e, 1e-10).unwrap().0;
        let b = fields::edge_energy(&d, &flipped, 1e-10).unwrap().0;
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }
}

#[test]
fn d3_edge_matches_analytic_term() {
    // Edge of length 2/k² with normal λ and jump λ(1 − k² t), t the arclength.
    let k = 2.0;
    let lambda = [0.6, 0.8];
    for d in [frob(), aniso()] {
        let len = 2.0 / (k * k);
        let e = JumpEdge {
            p: [0.0, 0.0],
            q: [-lambda[1] * len, lambda[0] * len],
            normal: lambda,
            left: 0,
            right: 1,
            jump_p: lambda,
            jump_q: [-lambda[0], -lambda[1]],
        };
        let got = fields::edge_energy(&d, &e, 1e-12).unwrap().0;
        let neg = [-lambda[0], -lambda[1]];
        let want = (d.value(&lambda, &lambda) + d.value(&neg, &lambda)) / (2.0 * k * k);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn silhavy_field_at_k8_within_closed_form() {
    let d = frob();
    let lambda = [0.8, -0.6];
    let eta = [0.0, 1.0];
    let atoms = constructions::symmetrized_atoms(&lambda, &eta);
    let c = constructions::silhavy_lattice(&lambda, &eta, &atoms, 8).unwrap();
    let e = energy(&d, &c.field().unwrap());
    assert!(e <= c.closed_form(&d) + 1e-8);
    assert!(e >= d.value(&lambda, &eta) - 1e-9);
}

#[test]
fn silhavy_field_at_k32_dominates_flat_jump() {
    let d = frob();
    let lambda = [1.0, 0.0];
    let eta = [0.0, 1.0];
    let atoms = constructions::symmetrized_atoms(&lambda, &eta);
    let c = constructions::silhavy_lattice(&lambda, &eta, &atoms, 32).unwrap();
    let e = energy(&d, &c.field().unwrap());
    assert!(e >= d.value(&lambda, &eta) - 0.1);
}

#[test]
fn construction_limits() {
    let d = frob();
    let zero = constructions::single_jump(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
    assert_eq!(zero.closed_form(&aniso()), 0.0);
    let lambda = [0.7, -1.1];
    let eta = [0.6, 0.8];
    let s = constructions::subadditivity_strip(&lambda, &[0.0, 0.0], &eta, 16).unwrap();
    assert!((s.limit(&aniso()) - aniso().value(&lambda, &eta)).abs() < 1e-12);
    let s = constructions::subadditivity_strip(&[0.0, 2.0], &[0.0, 1.0], &[0.0, 1.0], 16).unwrap();
    assert!((s.limit(&d) - 2.0).abs() < 1e-12);

    let t = constructions::eta_convexity_triangles(&lambda, &eta, &eta, 8).unwrap();
    let two_eta = linalg::scale(&eta, 2.0);
    assert!((t.limit(&aniso()) - aniso().bar(&lambda, &two_eta)).abs() < 1e-12);
    let t = constructions::eta_convexity_triangles(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], 8).unwrap();
    assert!((t.limit(&d) - 2.0).abs() < 1e-12);
    assert!(t.limit(&d) >= t.reference(&d) && (t.reference(&d) - 2f64.sqrt()).abs() < 1e-12);
    let field = t.field().unwrap();
    assert!((energy(&d, &field) * t.field_scale() - t.closed_form(&d)).abs() < 1e-10);
    assert!(matches!(
        constructions::eta_convexity_triangles(&lambda, &eta, &[-0.6, -0.8], 8),
        Err(constructions::ConstructionError::ZeroSum)
    ));
}

#[test]
fn symmetrized_atom_limit() {
    let d = aniso();
    let lambda = [1.5, -2.0];
    let eta = [0.6, 0.8];
    let atoms = constructions::symmetrized_atoms(&lambda, &eta);
    let c = constructions::silhavy_lattice(&lambda, &eta, &atoms, 8).unwrap();
    let want = d.bar(&linalg::scale(&lambda, 0.5), &eta) + d.bar(&linalg::scale(&eta, 0.5), &lambda);
    assert!((c.limit(&d) - want).abs() < 1e-12);
    let bad = vec![(lambda.to_vec(), eta.to_vec())];
    assert!(constructions::silhavy_lattice(&lambda, &eta, &bad, 8).is_err());
}

#[test]
fn symmetry_triangle_terms() {
    let c = constructions::symmetry_triangles(&[1.0, 0.0], &[0.0, 1.0], 4).unwrap();
    let t = c.symmetry_terms(&frob(), 4);
    assert!((t.d1 - 1.0 / 32.0).abs() < 1e-15);
    assert!((t.inside - 0.234375).abs() < 1e-15);
    assert!(constructions::symmetry_triangles(&[0.0, 1.0], &[0.0, 1.0], 4).is_err());
    assert!(constructions::symmetry_triangles(&[1.0, 0.0], &[0.0, 1.0], 5).is_err());
}

#[test]
fn construction_json_tagged() {
    let c = constructions::subadditivity_strip(&[1.0, 2.0], &[0.5, 0.0], &[0.0, 1.0], 6).unwrap();
    let v = serde_json::to_value(&c).unwrap();
    assert_eq!(v["family"], "subadditivity_strip");
    assert_eq!(v["k"], 6);
    assert!(matches!(c.family, Family::SubadditivityStrip { .. }));
}

#[test]
fn frobenius_consistent_for_every_test_and_seed() {
    let d = frob();
    let dict = envelope::sample_dictionary(&d, 16, 0).unwrap();
    for seed in [1, 2, 3] {
        let s = CheckSettings {
            samples: 60,
            seed,
            dict: Some(&dict),
            refine_iters: 5,
            ks: vec![4, 8],
        };
        for t in [
            TestKind::Subadd,
            TestKind::EtaConvex,
            TestKind::BdSym,
            TestKind::Bv,
            TestKind::Bd,
            TestKind::Constructions,
        ] {
            let r = checkers::run_check(&d, t, &s).unwrap();
            assert!(!r.violated(), "{} seed {seed}: {:?}", t.name(), r.witness());
        }
    }
}

#[test]
fn witness_recheck_is_sound() {
    let r = checkers::check_bd_symmetry(&aniso(), 50, 1).unwrap();
    let w = r.witness().expect("aniso violates symmetry");
    assert!(checkers::recheck(&aniso(), w));
    assert!(!checkers::recheck(&frob(), w));
}
