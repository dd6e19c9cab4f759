use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no complete observations")]
    NoCompleteObservations,

    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("csv error at row {row}, column '{column}': {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class: 2 for data problems, 3 for
    /// numeric failures, 1 for everything caused by how the tool was invoked.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::InvalidData(_)
            | Error::Csv { .. }
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Dimension(_)
            | Error::NoCompleteObservations => 2,
            Error::Domain(_) | Error::NonFiniteObjective { .. } => 3,
        }
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Dimension(_) => "dimension",
            Error::InvalidData(_) => "invalid_data",
            Error::Config(_) => "config",
            Error::NoCompleteObservations => "no_complete_observations",
            Error::NonFiniteObjective { .. } => "non_finite_objective",
            Error::Csv { .. } => "csv",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
