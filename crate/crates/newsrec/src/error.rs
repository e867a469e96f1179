//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by tensors, encoders, data ingestion, and the runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor dimensions incompatible with the requested operation.
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Structurally valid input that the operation cannot meaningfully
    /// process (empty sequence, fully masked row, empty title, ...).
    #[error("degenerate input in {op}: {detail}")]
    DegenerateInput { op: &'static str, detail: String },

    /// Invalid configuration value (even conv window, zero heads, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Lookup index outside its table.
    #[error("index error: {0}")]
    Index(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    /// Parameter that cannot be attributed to a model component.
    #[error("parameter accounting error: {0}")]
    Accounting(String),

    /// Checkpoint/config protocol violation.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn degenerate(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DegenerateInput {
            op,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
