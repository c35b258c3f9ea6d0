use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed wav: {0}")]
    MalformedWav(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("signal too short: {samples} samples, one frame needs {frame_len}")]
    SignalTooShort { samples: usize, frame_len: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("feature dimension mismatch: model expects {expected}, sequence has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient training data: {0}")]
    InsufficientData(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("EM log-likelihood decreased for {label} at iteration {iteration}: {before} -> {after}")]
    EmNotMonotone {
        label: String,
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("integrity error in {path}: {reason}")]
    Integrity { path: PathBuf, reason: String },

    #[error("missing model: {0}")]
    MissingModel(String),

    #[error("unknown claimant: {0}")]
    UnknownClaimant(String),

    #[error("degenerate trial set: {0}")]
    DegenerateTrialSet(String),

    #[error("manifest rejected with {} violation(s): {}", .0.len(), .0.join("; "))]
    ManifestInvalid(Vec<String>),

    #[error("manifest parse error: {0}")]
    ManifestParse(String),

    #[error("invalid synthesis spec: {0}")]
    SpecInvalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
