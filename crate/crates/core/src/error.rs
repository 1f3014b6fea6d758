use thiserror::Error;

/// Errors surfaced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A deterministic numerical routine failed to reach its accuracy target.
    #[error("numeric failure in {context}: {detail}")]
    NumericFailure { context: String, detail: String },

    #[error("training failure: {0}")]
    TrainingFailure(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::NumericFailure {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
