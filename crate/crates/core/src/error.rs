use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PFM: {0}")]
    MalformedPfm(String),

    #[error("truncated PFM payload: expected {expected} bytes, found {found}")]
    TruncatedPfm { expected: usize, found: usize },

    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),

    #[error("png codec error: {0}")]
    Png(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("infeasible cut constraints: {0}")]
    InfeasibleConstraints(String),

    #[error("unknown phong key {key}; nearest available: {nearest}")]
    UnknownKey { key: String, nearest: String },

    #[error("csv error: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
