//! Shared error type for the whole toolkit.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input file not found: {path}")]
    MissingInput { path: PathBuf },

    #[error("schema mismatch in {path}: expected {expected} columns, found {found}")]
    Schema {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unknown label {label:?} (vocabulary: {vocabulary:?})")]
    UnknownLabel {
        label: String,
        vocabulary: Vec<String>,
    },

    #[error("column {column:?}: value {value:?} not in the fitted vocabulary")]
    Encoding { column: String, value: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("label set {0:?} is not registered in the powerset codec")]
    UnknownClass(Vec<String>),

    #[error("class id {id} out of range (codec has {len} classes)")]
    ClassRange { id: usize, len: usize },

    #[error("checkpoint corrupted: {0}")]
    Corrupt(String),

    #[error("checkpoint format version {found} unsupported (this build reads version {expected})")]
    Version { found: u32, expected: u32 },

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("generated rows are only valid for pre-training, not fine-tuning or evaluation")]
    GeneratedData,

    #[error("reports were produced from different datasets: {0} vs {1}")]
    DatasetMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 training.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Argument(_) => 1,
            Error::Diverged { .. } => 3,
            _ => 2,
        }
    }
}
