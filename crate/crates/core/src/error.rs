use crate::tensor::Shape;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: Shape, found: Shape },

    #[error("buffer length {len} does not match shape {shape}")]
    BadLength { shape: Shape, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel {kernel_h}x{kernel_w} does not fit a {image_h}x{image_w} image")]
    KernelTooLarge {
        kernel_h: usize,
        kernel_w: usize,
        image_h: usize,
        image_w: usize,
    },

    #[error("kernel has no nonzero taps")]
    ZeroKernel,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("solver conditions violated: {0}")]
    ConditionViolated(String),

    #[error("iteration cap of {0} reached before tolerance")]
    IterationCap(usize),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("denoiser peer reported error: {0}")]
    PeerError(String),

    #[error("denoiser peer timed out after {0:.1} s")]
    Timeout(f64),

    #[error("denoiser peer closed the connection")]
    PeerClosed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
