use thiserror::Error;

/// Errors raised by model construction, simulation and the analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("time {t} outside [0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("event cap of {cap} exceeded at time {time}")]
    Runaway { cap: usize, time: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("empty input")]
    EmptyInput,
    #[error("lyapunov spec does not match the velocity law: {0}")]
    SpecMismatch(String),
    #[error("contraction hypotheses fail:\n{0}")]
    Hypotheses(String),
    #[error("phi construction failed: {0}")]
    PhiConstruction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
