//! Numerical tolerances used across the crate.
//!
//! Every cutoff that a test or a validity check depends on is named here so
//! that the value is set in exactly one place.

/// Maximum entrywise deviation |H - H^dag| (relative to the largest entry)
/// for a matrix to count as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Maximum entrywise deviation |U^dag U - I| for a matrix to count as unitary.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Minimum ideal-propagator fidelity a compiled sequence must achieve against
/// its target before it is handed back to the caller.
pub const CERTIFICATE_FIDELITY: f64 = 1.0 - 1e-9;

/// Maximum Frobenius residual (per unit norm) tolerated when fitting the
/// first-order error model to a simulated pulse. Larger residuals mean the
/// pulse is too poor for a first-order description and the fit is rejected.
pub const FIRST_ORDER_RESIDUAL_TOL: f64 = 1e-3;

/// Relative singular-value / projection threshold used in Lie-algebra rank
/// computations: components above `RANK_TOL * scale` count as nonzero.
pub const RANK_TOL: f64 = 1e-9;

/// A piecewise-constant step is flagged as too coarse when
/// `max |H_k| * dt` exceeds this angle (radians).
pub const STEP_ANGLE_WARN: f64 = 0.1;

/// Control-sequence time stamps must be uniform to this resolution (seconds).
pub const DT_UNIFORMITY: f64 = 1e-9;

/// A coupled pair counts as weakly coupled when the offset difference exceeds
/// `WEAK_COUPLING_FACTOR * |coupling|`.
pub const WEAK_COUPLING_FACTOR: f64 = 10.0;

/// Density matrices must have unit trace within this tolerance.
pub const DENSITY_TRACE_TOL: f64 = 1e-10;

/// Density-matrix eigenvalues may undershoot zero by at most this amount.
pub const DENSITY_EIGENVALUE_FLOOR: f64 = -1e-10;

/// Relative fitness improvement below which an optimizer iteration counts as
/// stalled, and the number of consecutive stalled iterations that stop a run.
pub const STALL_REL_IMPROVEMENT: f64 = 1e-10;
pub const STALL_PATIENCE: usize = 25;

/// Default maximum number of spins (dense matrices of dimension 2^12 = 4096).
pub const MAX_SPINS: usize = 12;
