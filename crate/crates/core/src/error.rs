use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SppError>;

#[derive(Debug, Error)]
pub enum SppError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("pattern error: {0}")]
    Pattern(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("state error: {0}")]
    State(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("training diverged at step {step}: {detail}; last good step: {}", last_good.map_or("none".to_string(), |s| s.to_string()))]
    Diverged {
        step: usize,
        last_good: Option<usize>,
        detail: String,
    },

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("metadata error: {0}")]
    Meta(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SppError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        SppError::Shape(msg.into())
    }

    pub(crate) fn pattern(msg: impl Into<String>) -> Self {
        SppError::Pattern(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        SppError::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SppError::Io {
            path: path.into(),
            source,
        }
    }
}
