use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected n = {expected}, found n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("critical radius bracketing failed: {0}")]
    Bracketing(String),

    #[error("no feasible (C0, N0) in the search grid")]
    InfeasibleFit,

    #[error("grid under-resolved: {0}")]
    UnderResolved(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inadmissible exponents: {0}")]
    Inadmissible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
