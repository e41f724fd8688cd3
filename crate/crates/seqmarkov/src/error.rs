//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input (bad alphabet, ragged rows, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects that must agree in shape or labels do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The requested estimate is undefined on this data (e.g. no observations).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// The Newton step for covariate coefficients cannot proceed because the
    /// observed-information matrix is numerically singular. Restart
    /// controllers treat this as a failed round, not a fatal error.
    #[error("estimation of covariate coefficients failed: singular Hessian in Newton step")]
    SingularHessian,

    /// Every restart round failed; the per-round diagnostics are attached.
    #[error("all {} estimation rounds failed; first failure: {}", .0.len(), .0.first().map(|s| s.as_str()).unwrap_or("none"))]
    AllRoundsFailed(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-parsable class name for CLI error lines.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Estimation(_) => "Estimation",
            Error::SingularHessian => "SingularHessian",
            Error::AllRoundsFailed(_) => "AllRoundsFailed",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
