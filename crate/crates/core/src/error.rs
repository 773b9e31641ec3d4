//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("curve must contain at least {min} points, got {got}")]
    CurveTooShort { min: usize, got: usize },

    #[error("curve value at index {index} is not finite")]
    NonFiniteValue { index: usize },

    #[error("segment {id:?}: channel lengths differ (x has {x_len}, y has {y_len})")]
    ChannelLengthMismatch { id: String, x_len: usize, y_len: usize },

    #[error("segment id must be non-empty")]
    EmptySegmentId,

    #[error("duplicate segment id {id:?}")]
    DuplicateSegmentId { id: String },

    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("cluster {label}: {reason}")]
    InsufficientClusterData { label: usize, reason: String },

    #[error("unknown label {value:?}")]
    UnknownLabel { value: String },

    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("model file: {0}")]
    ModelFile(String),
}
