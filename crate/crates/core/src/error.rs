use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A parameter lies outside the admissible domain of a rate formula.
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("boundary data flux incompatibility {0:.3e} exceeds threshold {1:.3e}")]
    FluxIncompatible(f64, f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
