use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("shape parameter beta = {0} outside (0, 1]")]
    InvalidShape(f64),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics and report failure cells.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::InvalidSample(_) => "InvalidSample",
            Error::InvalidShape(_) => "InvalidShape",
            Error::RankDeficient(_) => "RankDeficient",
            Error::Io { .. } => "IoError",
            Error::Parse(_) => "ParseError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::DimMismatch { expected, found }
    }
}
