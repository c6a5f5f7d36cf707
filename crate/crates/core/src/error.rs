use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the lab. Diagnostics never return these for a failed
/// bound; a failed bound is a `Violated` record, not an error.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("point {point:?} lies outside the domain {domain:?}")]
    Domain { point: Vec<f64>, domain: Vec<[f64; 2]> },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("leapfrog became unstable at t = {time:.4e}: norm grew by {growth:.3e}")]
    Cfl { time: f64, growth: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        LabError::Argument(msg.into())
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
