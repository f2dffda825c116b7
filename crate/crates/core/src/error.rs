use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed audio file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported encoding in {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no motif: profile has no finite distance")]
    NoMotif,

    #[error("data integrity: {0}")]
    DataIntegrity(String),

    #[error("insufficient diversity: {0}")]
    InsufficientDiversity(String),

    #[error("npy: {0}")]
    Npy(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
