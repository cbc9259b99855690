use std::io;

use thiserror::Error;

/// Errors produced anywhere in the lighting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("no pixel has positive luminance; cannot detect lights")]
    NoLight,

    #[error("degree-1 SH vector is zero; lighting is isotropic")]
    IsotropicLight,

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt file at byte offset {offset}: {message}")]
    Corrupt { offset: u64, message: String },

    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
