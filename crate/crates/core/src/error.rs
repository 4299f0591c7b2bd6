use thiserror::Error;

/// Errors produced while loading data, evaluating or training a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}: `{content}`")]
    Parse {
        line: usize,
        content: String,
        msg: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("feature id {id} out of range for dimension {dim}")]
    Dimension { id: usize, dim: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
