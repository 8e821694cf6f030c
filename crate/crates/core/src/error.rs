//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions do not line up for the requested operation.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// An argument is outside its documented domain (non-positive bandwidth,
    /// negative epsilon, NaN cost entries, ...).
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Fewer samples than the estimator needs (e.g. unbiased statistics
    /// require at least two rows per group).
    #[error("{what} needs at least {needed} samples, got {got}")]
    InsufficientSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    /// A batch contained only one sensitive class where both are required.
    #[error("batch contains a single sensitive class; cannot form both groups")]
    SingleClassBatch,

    /// Pearson correlation is undefined for a constant input vector.
    #[error("correlation undefined: {side} vector is constant")]
    UndefinedCorrelation { side: &'static str },

    /// Too many sampled batches were single-class to trust the run.
    #[error(
        "data too imbalanced: {skipped} of {scheduled} batches were single-class (> 20% skipped)"
    )]
    DataBalance { skipped: usize, scheduled: usize },

    /// A CSV cell or row failed to parse; `line` is 1-based and counts the
    /// header.
    #[error("csv parse error at line {line}: {reason}")]
    CsvParse { line: usize, reason: String },

    /// A dataset or batch was empty where at least one row is required.
    #[error("empty batch: {context}")]
    EmptyBatch { context: String },

    /// A run/experiment configuration failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// A checkpoint file is malformed or does not match the expected layout.
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
