use thiserror::Error;

/// Errors produced anywhere in the separation / feature / classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Filter bank / sample rate combination that cannot be realised.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// Malformed or unsupported file contents.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Numerically degenerate input (singular covariance, collinear channels).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Classifier training could not proceed.
    #[error("training error: {0}")]
    Training(String),

    /// Too many failed trials in an experiment run.
    #[error("experiment error: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Configuration(_) => "configuration",
            Error::Format { .. } => "format",
            Error::Degenerate(_) => "degenerate",
            Error::Training(_) => "training",
            Error::Experiment(_) => "experiment",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
