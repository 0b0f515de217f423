//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv parse error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("{path}: unexpected header {found:?}, expected {expected:?}")]
    BadHeader {
        path: String,
        expected: String,
        found: String,
    },

    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("record {source_id}: abbreviation token at raw index {location} was removed by normalization")]
    AbbrevTokenRemoved { source_id: u64, location: usize },

    #[error("label vocabulary: {0}")]
    Vocab(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("corpus store: {0}")]
    Store(String),

    #[error("label id {label} out of range (label count {label_count})")]
    LabelOutOfRange { label: u32, label_count: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training failed after {iterations} iterations: {message}")]
    Training { iterations: usize, message: String },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("prediction file: {0}")]
    Prediction(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("model file: {0}")]
    Model(String),
}
