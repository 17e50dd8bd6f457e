use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("released model for target {index} failed: {source}")]
    TargetFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("shadow model {index} failed: {source}")]
    ShadowFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error in {path:?}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("undecided: {0}")]
    Undecided(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by the numbers rather than by the inputs'
    /// shape or validity.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence(_) | Error::Numerical(_) | Error::Undecided(_) => true,
            Error::ShadowFailed { source, .. } | Error::TargetFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
