use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema violation; `path` is the offending field.
    #[error("invalid config at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario `{scenario}`: {source}")]
    Module {
        scenario: String,
        #[source]
        source: kahler_lab::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<kahler_lab::Error> for CliError {
    fn from(source: kahler_lab::Error) -> Self {
        CliError::Module { scenario: String::new(), source }
    }
}

impl CliError {
    /// Attaches the scenario name to a module error.
    pub fn in_scenario(self, name: &str) -> Self {
        match self {
            CliError::Module { source, .. } => CliError::Module { scenario: name.to_string(), source },
            other => other,
        }
    }

    /// Process exit code: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Config(_) | CliError::UnknownScenario(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
