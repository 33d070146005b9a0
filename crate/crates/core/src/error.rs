use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structure has no atoms")]
    EmptyStructure,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cannot normalize a zero vector (norm {0:e})")]
    ZeroVector(f64),
    #[error("feature vector is not unit-normalized (norm {0})")]
    NotNormalized(f64),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("precision matrix has not been finalized")]
    InvalidPrecision,
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("geometry generation failed: {0}")]
    Geometry(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config key '{key}': {msg}")]
    Config { key: String, msg: String },
    #[error("reference check failed: {0}")]
    CheckFailed(String),
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Factorization(_) | Error::NonFinite(_) | Error::ZeroVector(_) | Error::CheckFailed(_)
        )
    }
}
