use std::io;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are grouped by the CLI exit code they map to: configuration
/// problems exit with 2, missing prerequisite outputs with 3, and every
/// numerical failure with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size error: {what} = {got} exceeds the limit {limit}")]
    Size {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("resource error: box with {attempted} vertices exceeds the memory budget of {budget}")]
    Resource { attempted: usize, budget: usize },
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("bracketing error: {0}")]
    Bracketing(String),
    #[error("blow-up: closed-form bracket is {bracket} <= 0 at r = {r}")]
    BlowUp { r: f64, bracket: f64 },
    #[error("stiffness: step size underflow at t = {t}")]
    Stiffness { t: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("pole: {0}")]
    Pole(String),
    #[error("extrapolation error: {0}")]
    Extrapolation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("dependency error: missing output of stage `{stage}` ({path})")]
    Dependency { stage: String, path: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code used by the `lrp` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Dependency { .. } => 3,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
            _ => 4,
        }
    }
}
