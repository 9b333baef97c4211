use harnack_lab::LabError;
use thiserror::Error;

/// Everything that stops a run before a report exists. All map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed config: {0}")]
    Parse(String),

    #[error("invalid config key '{key}': {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Lab(#[from] LabError),
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
