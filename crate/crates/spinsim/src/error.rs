//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    #[error("spin index {index} out of range for {n_spins}-spin system")]
    SpinIndexOutOfRange { index: usize, n_spins: usize },

    #[error("system of {requested} spins exceeds the dimension cap of {cap}")]
    DimensionCapExceeded { requested: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max |H - H^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max |U^dag U - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("no spin of species '{0}' in the system")]
    UnknownSpecies(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid control sequence: {0}")]
    InvalidControls(String),

    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    #[error("pair ({i}, {j}) is not in the weak-coupling regime (|Δν| = {delta_hz:.3} Hz, coupling {coupling_hz:.3} Hz)")]
    StrongCouplingPair {
        i: usize,
        j: usize,
        delta_hz: f64,
        coupling_hz: f64,
    },

    #[error("compiled sequence failed verification against its target (fidelity {fidelity})")]
    VerificationFailed { fidelity: f64 },

    #[error("first-order error fit residual {residual:.3e} exceeds threshold {threshold:.3e}; pulse is outside the first-order regime")]
    FitResidualTooLarge { residual: f64, threshold: f64 },

    #[error("delay correction infeasible: delay at event {event} would become negative ({duration_s:.3e} s)")]
    InfeasibleCorrection { event: usize, duration_s: f64 },

    #[error("system is not fully controllable (Lie-algebra rank {rank} < {required})")]
    NotControllable { rank: usize, required: usize },

    #[error("linear algebra backend error: {0}")]
    Linalg(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
