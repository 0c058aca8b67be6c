use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("no convergence after {iterations} sweeps (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("point outside the field domain: {0}")]
    OutOfDomain(String),
    #[error("test function is not compactly supported: {0}")]
    InvalidTestFunction(String),
    #[error("fields do not share grid metadata")]
    InvalidPair,
    #[error("logarithmic pole at theta = {0}")]
    Pole(f64),
    #[error("node row {row} lacks a full finite-difference stencil")]
    InsufficientStencil { row: usize },
    #[error("invalid support boundary: {0}")]
    InvalidBoundary(String),
    #[error("support region is empty")]
    EmptySurface,
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
