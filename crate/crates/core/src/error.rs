use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required column or manifest key is absent.
    #[error("schema error: {0}")]
    Schema(String),

    /// Data violates a structural invariant (ragged rows, NaN after imputation, mixed lengths).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("label error: cannot parse flare label {0:?}")]
    Label(String),

    /// Caller passed an argument outside an operation's domain.
    #[error("argument error: {0}")]
    Argument(String),

    #[error("training error: {0}")]
    Training(String),

    /// A skill score whose denominator vanishes (one class absent).
    #[error("undefined score: {0}")]
    UndefinedScore(String),

    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 1 internal, 2 usage (including missing inputs), 3 data validation,
    /// 4 undefined score.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::MissingInput(_) => 2,
            Error::Schema(_) | Error::Validation(_) | Error::Label(_) | Error::Training(_) => 3,
            Error::UndefinedScore(_) => 4,
            Error::Io { .. } | Error::Json(_) | Error::Csv(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Validation(_) => "validation",
            Error::Label(_) => "label",
            Error::Argument(_) => "argument",
            Error::Training(_) => "training",
            Error::UndefinedScore(_) => "undefined_score",
            Error::MissingInput(_) => "missing_input",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
