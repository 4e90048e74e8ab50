use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point lies outside the feasible set: {0}")]
    Domain(String),
    #[error("non-finite numeric input: {0}")]
    Numeric(String),
    #[error("inner solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("graph generation failed: {0}")]
    Generation(String),
    #[error("mixing rule mismatch: {0}")]
    RuleMismatch(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },
    #[error("invalid state: {0}")]
    State(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
