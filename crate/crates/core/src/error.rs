use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("click {index} at ({x}, {y}) lies outside the {width}x{height} image")]
    ClickOutOfBounds {
        index: usize,
        x: u32,
        y: u32,
        width: usize,
        height: usize,
    },

    #[error("map has zero total mass")]
    ZeroMass,

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("correlation undefined: zero variance")]
    UndefinedCorrelation,

    #[error("{0} undefined for this input")]
    Undefined(&'static str),

    #[error("degenerate score distribution: level {level} would be empty")]
    DegenerateBins { level: usize },

    #[error("non-finite {what} at epoch {epoch}, batch {batch}")]
    NonFinite {
        what: &'static str,
        epoch: usize,
        batch: usize,
    },

    #[error("missing sessions for (participant, chart): {0:?}")]
    MissingSessions(Vec<(String, String)>),

    #[error("data leakage: test participant {0} appears in the training split")]
    Leakage(String),

    #[error("quartile empty: need at least 4 participants, got {0}")]
    QuartileEmpty(usize),

    #[error("record keys differ between result sets")]
    KeyMismatch,

    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (non-finite values, undefined
    /// statistics) as opposed to malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ZeroMass
                | Error::UndefinedCorrelation
                | Error::Undefined(_)
                | Error::NonFinite { .. }
                | Error::DegenerateBins { .. }
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
