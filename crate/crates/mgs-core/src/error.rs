//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, rendering, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range for length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("training diverged at step {step}")]
    TrainingDiverged { step: u64 },

    #[error("empty envelope: no operating points")]
    EmptyEnvelope,

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("csv parse error at line {line}, column {column}: {message}")]
    CsvParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("png error: {0}")]
    Png(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
