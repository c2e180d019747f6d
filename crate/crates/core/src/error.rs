use std::path::PathBuf;

/// Error type shared by all pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("trajectory {id} has {n} points, need at least {min}")]
    TooShort { id: String, n: usize, min: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("bounding box is degenerate (zero width or height)")]
    DegenerateBbox,

    #[error(
        "pairwise distance matrix needs {needed} pairs but the budget allows {allowed}; \
         raise the budget or shrink the corpus"
    )]
    PairBudgetExceeded { needed: u64, allowed: u64 },

    #[error("brute-force coupling enumeration limited to |a|*|b| <= {limit}, got {got}")]
    BruteForceTooLarge { limit: usize, got: usize },

    #[error("ROC needs both classes; got {n_pos} positives and {n_neg} negatives")]
    SingleClass { n_pos: usize, n_neg: usize },

    #[error("training loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("model checkpoint is malformed: {0}")]
    BadCheckpoint(String),

    #[error("distance matrix cache mismatch: expected corpus hash {expected}, file has {found}")]
    CacheMismatch { expected: u64, found: u64 },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Csv {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
