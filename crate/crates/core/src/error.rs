use thiserror::Error;

/// Errors produced by mesh construction, assembly, the linear solvers and the
/// time-stepping drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular system at pivot {pivot}")]
    SingularSystem { pivot: usize },

    #[error("singular {variant} system at pivot {pivot}")]
    SingularScheme { variant: &'static str, pivot: usize },

    #[error("trajectory too short: need level {needed}, have {available} retained")]
    TrajectoryTooShort { needed: usize, available: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input rather than a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::ResourceLimit(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
