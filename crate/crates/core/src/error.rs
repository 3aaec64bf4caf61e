use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("region of interest does not intersect the image domain")]
    EmptyRoi,

    #[error("unsupported color conversion {from:?} -> {to:?}")]
    UnsupportedConversion {
        from: crate::imgcore::ColorSpace,
        to: crate::imgcore::ColorSpace,
    },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("alignment level {level} accepted only {accepted} of {total} patches (need at least 3)")]
    TooFewAccepted {
        level: usize,
        accepted: usize,
        total: usize,
        /// Row-major fidelity map of the failing level (true = accepted).
        fidelity: Vec<Vec<bool>>,
    },

    #[error("unknown strategy `{name}` (available: {available})")]
    UnknownStrategy { name: String, available: String },

    #[error("sidecar {path}: {reason}")]
    Sidecar { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Tiff(#[from] tiff::TiffError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::GeometryMismatch(msg.into())
    }
}
