use std::io;

use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} = {value} exceeds cap {cap}")]
    Capacity {
        what: &'static str,
        value: usize,
        cap: usize,
    },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite parameters at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
