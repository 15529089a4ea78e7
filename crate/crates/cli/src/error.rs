use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {message}")]
    ConfigParse { field: String, message: String },

    #[error("unknown model `{0}` (see `svi list-models`)")]
    UnknownModel(String),

    #[error("unknown integrator `{0}`")]
    UnknownIntegrator(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(#[from] svi_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::ConfigParse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigParse { .. } | CliError::UnknownModel(_) | CliError::UnknownIntegrator(_) => 2,
            CliError::NumericalFailure(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
