use std::path::PathBuf;

use dbd_core::DbdError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or flag combinations.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Data(#[from] DbdError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed sequence file {path}: {reason}")]
    SequenceFile { path: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for usage errors, 2 for anything wrong with the data or files.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_)
            | Self::Data(DbdError::InvalidConfig(_) | DbdError::InvalidNeighborhood { .. }) => 1,
            _ => 2,
        }
    }
}
