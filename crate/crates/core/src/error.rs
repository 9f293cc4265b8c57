use thiserror::Error;

use crate::dsl::DslError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: unknown environment, inconsistent settings.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Dsl(#[from] DslError),

    /// Training was stopped by a safety rail (NaN loss, advisory storm).
    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("generation client error: {0}")]
    Client(String),

    #[error("generation failed after {attempts} attempts")]
    GenerationFailed {
        attempts: usize,
        reports: Vec<crate::dsl::ValidationReport>,
        exchanges: Vec<crate::generator::Exchange>,
    },

    /// Provider credentials are missing; raised before any network call.
    #[error("missing credentials: {0}")]
    Auth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
