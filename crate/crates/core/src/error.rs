use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed line in one of the JSONL/CSV inputs.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    /// A record refers to an entity that does not exist.
    #[error("referential integrity: {0}")]
    ReferentialIntegrity(String),

    /// A record violates a data-model invariant.
    #[error("validation: {0}")]
    Validation(String),

    /// An invalid configuration value.
    #[error("config: {0}")]
    Config(String),

    #[error("unknown message id {0:?}")]
    UnknownMessage(String),

    #[error("no first read for message {0:?}")]
    NoFirstRead(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty cohort: {0}")]
    EmptyCohort(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty test set")]
    EmptyTestSet,

    #[error("cross-validation: {0}")]
    CrossValidation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
