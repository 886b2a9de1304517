use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("unknown item `{0}`")]
    NotFound(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("not enough pairs for bin cell ({bin_a}, {bin_b}): need {needed}, have {available}")]
    Shortfall {
        bin_a: usize,
        bin_b: usize,
        needed: usize,
        available: usize,
    },

    #[error("query `{query}` has only {available} eligible candidates, need {needed}")]
    InsufficientCandidates {
        query: String,
        needed: usize,
        available: usize,
    },

    #[error("task `{0}` has no surviving rankings")]
    EmptyTask(String),

    #[error("no easy negative available for anchor `{0}`")]
    EmptySamplingPool(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("metric undefined: {0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
