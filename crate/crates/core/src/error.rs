use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
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

    #[error("{path}:{line}: {message}")]
    DanglingReference {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: duplicate {what} `{id}`")]
    Duplicate {
        path: PathBuf,
        line: usize,
        what: &'static str,
        id: String,
    },

    #[error("{path}:{line}: {what} {value} outside [{lo}, {hi}]")]
    OutOfRange {
        path: PathBuf,
        line: usize,
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("feature registry mismatch: {0}")]
    RegistryMismatch(String),

    #[error("objective diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed model file {path}: {message}")]
    Model { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
