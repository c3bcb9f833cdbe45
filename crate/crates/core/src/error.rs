//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QbeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported element `{0}`: only hydrogen is available")]
    UnsupportedElement(String),

    #[error("overlap matrix is near-singular (smallest eigenvalue {0:e})")]
    LinearDependence(f64),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QbeError {
    fn from(e: std::io::Error) -> Self {
        QbeError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QbeError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QbeError::InvalidArgument(msg.into()))
}
