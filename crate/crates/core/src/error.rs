use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("unknown texture id `{0}`")]
    UnknownTexture(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("episode too short: need {needed} samples, have {have}")]
    EpisodeTooShort { needed: usize, have: usize },

    #[error("window too short: need more than {needed} samples, have {have}")]
    WindowTooShort { needed: usize, have: usize },

    #[error("robot stream does not cover samples {start}..{end} (length {len})")]
    MissingRobotSamples { start: usize, end: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in layer `{layer}`")]
    NonFinite { layer: String },

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("empty batch or dataset: {0}")]
    Empty(String),

    #[error("dataset is missing velocity {0} mm/s")]
    MissingVelocity(f64),

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("missing noise-floor calibration")]
    MissingNoiseFloor,

    #[error("quiet span {start}..{end} overlaps contact detected at sample {contact}")]
    QuietSpanOverlapsContact {
        start: usize,
        end: usize,
        contact: usize,
    },

    #[error("events come from different episodes (`{0}` vs `{1}`)")]
    MismatchedEpisodes(String, String),

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("hash mismatch for {path}: manifest {expected}, file {actual}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for failures rooted in numerics (divergence, NaN/Inf) rather than data or usage.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Diverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
