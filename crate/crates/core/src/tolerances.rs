//! Numerical tolerances shared across modules.
//!
//! Every threshold that decides a branch (rank test, LP optimality, edge
//! pairing, verdicts) lives here so that tests and the CLI agree on them.

/// Allowed deviation of |η| from 1 on input.
pub const UNIT_TOL: f64 = 1e-10;

/// Relative second-singular-value threshold for the rank-one test.
pub const RANK1_REL_TOL: f64 = 1e-9;

/// LP primal feasibility and reduced-cost optimality (absolute).
pub const LP_TOL: f64 = 1e-10;

/// Pivot magnitude below which a basis entry is treated as zero.
pub const LP_PIVOT_TOL: f64 = 1e-11;

/// Symmetry check for inputs of the symmetric envelope.
pub const SYM_TOL: f64 = 1e-12;

/// Target relative residual after refinement.
pub const REFINE_RESIDUAL_REL: f64 = 1e-8;

/// Central finite-difference step used by refinement.
pub const FD_STEP: f64 = 1e-6;

/// Initial penalty factor (multiplied by |F|) in refinement.
pub const PENALTY_INIT: f64 = 1e4;

/// Penalty growth per refinement round.
pub const PENALTY_GROWTH: f64 = 10.0;

/// Number of penalty rounds in refinement.
pub const REFINE_ROUNDS: usize = 3;

/// Endpoint coincidence for shared polygon edges.
pub const EDGE_TOL: f64 = 1e-9;

/// Collinearity (cross product) for shared polygon edges.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Trace mismatch below which an interface carries no jump.
pub const JUMP_ZERO_TOL: f64 = 1e-12;

/// Total cell area must equal one within this.
pub const AREA_TOL: f64 = 1e-10;

/// Largest admissible pairwise overlap area.
pub const OVERLAP_TOL: f64 = 1e-12;

/// Smallest admissible cell area.
pub const MIN_CELL_AREA: f64 = 1e-14;

/// Default quadrature tolerance for edge energies.
pub const QUAD_TOL: f64 = 1e-8;

/// Maximum bisection depth of the adaptive quadrature.
pub const QUAD_MAX_DEPTH: usize = 40;

/// Relative slack used by the inequality checkers.
pub const CHECK_REL_TOL: f64 = 1e-9;

/// Extra margin (relative to scale) before an envelope undercut counts.
pub const ENVELOPE_MARGIN: f64 = 1e-6;

/// Required accuracy of a rank-one decomposition fed to the lattice family.
pub const DECOMPOSITION_TOL: f64 = 1e-10;
