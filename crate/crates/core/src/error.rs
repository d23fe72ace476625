use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tree construction failed for candidate classes {classes:?}: {msg}")]
    BuildFailure { classes: Vec<usize>, msg: String },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}
