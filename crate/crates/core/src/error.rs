use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing label map for image {image}: expected {expected}")]
    MissingLabel { image: PathBuf, expected: PathBuf },

    #[error("kernel sets overlap between train and test: {0}")]
    KernelOverlap(String),

    #[error("blur kernel ({kernel}x{kernel}) larger than image ({height}x{width})")]
    KernelTooLarge {
        kernel: usize,
        height: usize,
        width: usize,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite loss at iteration {iter} of stage {stage}; diagnostics at {snapshot}")]
    NonFiniteLoss {
        stage: u8,
        iter: usize,
        snapshot: PathBuf,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
