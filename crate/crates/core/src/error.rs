use thiserror::Error;

/// Errors raised by the simulator and its verifiers.
#[derive(Debug, Error)]
pub enum QnsError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("field contains non-finite values ({count} of {len})")]
    NonFiniteField { count: usize, len: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density lost positivity: min rho = {min:e} (floor {floor:e}) at t = {time}")]
    DensityNonPositive { min: f64, floor: f64, time: f64 },

    #[error("time step {dt:e} fell below the minimum {min:e}")]
    StepTooSmall { dt: f64, min: f64 },

    #[error("weak-form check needs at least 3 time levels, got {got}")]
    InsufficientSnapshots { got: usize },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QnsError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(QnsError::Domain(msg.into()))
}
