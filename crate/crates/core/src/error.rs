use std::path::PathBuf;

use thiserror::Error;

/// Every failure the pipeline can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing column `{0}`")]
    Schema(String),

    #[error("line {line}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        line: usize,
        column: String,
        value: String,
    },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("not enough {class} samples for the {split} split: requested {requested}, available {available} (shortfall {shortfall})")]
    Capacity {
        class: &'static str,
        split: &'static str,
        requested: usize,
        available: usize,
        shortfall: usize,
    },

    #[error("non-finite gradient in tensor `{tensor}`")]
    NonFiniteGradient { tensor: String },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("checksum mismatch: file is corrupt")]
    Corrupt,

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Format(_)
            | Error::Capacity { .. }
            | Error::Corrupt
            | Error::Version { .. }
            | Error::Io { .. } => 3,
            Error::NonFiniteGradient { .. }
            | Error::Diverged { .. }
            | Error::Numeric(_)
            | Error::UndefinedMetric(_) => 4,
            Error::InvalidArgument(_) | Error::Stage { .. } => 1,
        }
    }
}
