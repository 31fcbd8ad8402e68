use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: empty input")]
    Empty { op: &'static str },

    #[error("backward: {0}")]
    Backward(String),

    #[error("gradient check: {0}")]
    GradCheck(String),

    #[error("invalid mixture: {0}")]
    Mixture(String),

    #[error("unknown bucket {bucket} (mixture has {buckets} buckets)")]
    UnknownBucket { bucket: usize, buckets: usize },

    #[error("precision matrix is not positive semidefinite")]
    NotPsd,

    #[error("vector is not unit norm (norm = {0})")]
    NotUnitNorm(f64),

    #[error("{0} requires at least two components")]
    TooFewComponents(&'static str),

    #[error("cell: {0}")]
    Cell(String),

    #[error("bucketed mixture needs a bucket id")]
    MissingBucket,

    #[error("empty sequence")]
    EmptySequence,

    #[error("target id {id} out of range for vocabulary of {vocab}")]
    TargetOutOfRange { id: usize, vocab: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("undefined metric: {0}")]
    Metric(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: String,
        line: u64,
        reason: String,
    },

    #[error("not a checkpoint")]
    NotACheckpoint,

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("truncated checkpoint")]
    TruncatedCheckpoint,

    #[error("checkpoint inconsistent with its description: {0}")]
    CheckpointShape(String),

    #[error("cannot compare reports: {0}")]
    Compare(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
