//! Elliptic envelopes of positively 1-homogeneous interfacial energy
//! densities `f(λ, η)`.
//!
//! The crate computes the rank-one convex envelope `Φ_f` by linear
//! programming over sampled atoms `μ ⊗ η` (and its symmetric variant on
//! `λ ⊙ η`), evaluates jump energies of piecewise-rigid competitor fields on
//! polygonal partitions of the unit square, builds the classical competitor
//! families with closed-form energies, and runs necessary-condition checks
//! for BV- and BD-ellipticity.

pub mod checkers;
pub mod cli;
pub mod constructions;
pub mod density;
pub mod envelope;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod lp;
pub mod oracle;
pub mod quadrature;
pub mod sampling;
pub mod tolerances;
