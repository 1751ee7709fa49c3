use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("memory budget exceeded: need {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Budget {
        required_bytes: u128,
        budget_bytes: u128,
    },

    #[error("operator is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("iteration did not converge: {0}")]
    NotConverged(String),

    #[error("degenerate ground state (gap {0:e})")]
    Degenerate(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
