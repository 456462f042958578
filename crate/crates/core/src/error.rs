use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("insufficient warm-up: need {needed} samples, got {got}")]
    InsufficientWarmup { needed: usize, got: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ingestion failed for {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported diagnostic: {0}")]
    Unsupported(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Unsupported(_) => 2,
            Error::Parse { .. }
            | Error::Ingestion { .. }
            | Error::InsufficientWarmup { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Checkpoint(_) => 3,
            Error::DegenerateSpectrum(_) | Error::Singular(_) => 4,
        }
    }
}
