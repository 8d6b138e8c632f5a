use std::path::PathBuf;

/// Errors produced by the shape, contour, SVM and evaluation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid landmark set: {0}")]
    InvalidLandmarks(String),

    #[error("degenerate shape: all landmarks coincide")]
    DegenerateShape,

    #[error("length mismatch: {left} vs {right} landmarks")]
    LengthMismatch { left: usize, right: usize },

    #[error("kernel width must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("optimal rotation undefined: inner product vanishes")]
    UndefinedRotation,

    #[error("mask has no foreground pixel")]
    EmptyMask,

    #[error("largest region has only {0} boundary pixel(s), need at least 3")]
    DegenerateRegion(usize),

    #[error("need at least 3 landmarks, got {0}")]
    TooFewLandmarks(usize),

    #[error("training set contains a single class")]
    SingleClass,

    #[error("SMO did not converge after {iterations} updates (max KKT gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("score tables do not describe the same samples: {0}")]
    SampleMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Strips any fold context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fold { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
