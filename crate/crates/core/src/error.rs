use thiserror::Error;

/// Errors produced by the completion toolkit.
#[derive(Debug, Error)]
pub enum SpcError {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("mode {mode} out of range for a tensor of order {ndim}")]
    ModeOutOfRange { mode: usize, ndim: usize },
    #[error("invalid dimensions {0:?}: every extent must be positive")]
    InvalidDims(Vec<usize>),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid penalty exponent p={0}; expected 1 (TV) or 2 (QV)")]
    InvalidExponent(u32),
    #[error("the observed set is empty")]
    EmptyObservedSet,
    #[error("evaluation region is empty")]
    EmptyRegion,
    #[error("signal energy is zero on the evaluation region")]
    ZeroSignal,
    #[error("sphere step degenerate: the step maps the vector onto the origin")]
    StepTooLarge,
    #[error("image of {height}x{width} is smaller than the {window}x{window} window")]
    ImageTooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported image: {0}")]
    UnsupportedImage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SpcError> = std::result::Result<T, E>;
