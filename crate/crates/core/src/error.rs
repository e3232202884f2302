use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PinnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PinnError {
    #[error("architecture error: {0}")]
    Architecture(String),

    #[error("numerical overflow in layer {layer}")]
    NumericalOverflow { layer: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl PinnError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PinnError::Io {
            path: path.into(),
            source,
        }
    }
}
