use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("{op}: non-finite value encountered")]
    NonFinite { op: &'static str },

    #[error("backward: {0}")]
    Backward(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("sequence length {len} exceeds max_len {max_len}")]
    TooLong { len: usize, max_len: usize },

    #[error("empty source sequence")]
    EmptySource,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scheduled sampling has no source-side distribution; it applies to the decoder only")]
    ScheduledOnEncoder,

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("throughput window too short")]
    WindowTooShort,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("unknown tokens: {}", .0.join(", "))]
    UnknownTokens(Vec<String>),

    #[error("malformed input at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
