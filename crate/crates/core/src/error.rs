use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DeconvError>;

#[derive(Debug, Error)]
pub enum DeconvError {
    #[error("empty input")]
    EmptyInput,

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("data length {len} does not match {width}x{height}")]
    LengthMismatch { width: usize, height: usize, len: usize },

    #[error("kernel {kernel:?} larger than image {image:?}")]
    KernelTooLarge {
        kernel: (usize, usize),
        image: (usize, usize),
    },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("field too small: {width}x{height}, need at least 3x3")]
    FieldTooSmall { width: usize, height: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined reach: alpha must be positive, got {0}")]
    UndefinedReach(f64),

    #[error("zero truth image")]
    ZeroTruth,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DeconvError {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        DeconvError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
