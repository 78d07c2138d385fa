use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config {path}: {source}", path = path.display())]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("config {path} is not valid JSON: {message}", path = path.display())]
    ConfigSyntax { path: PathBuf, message: String },
    /// Schema violation; `pointer` is a JSON pointer into the config.
    #[error("{pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error(transparent)]
    Compute(#[from] monopole_core::Error),
    #[error("cannot write {path}: {source}", path = path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub(crate) fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// 1 for bad input, 2 for numerical failures and output errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(e) if !e.is_usage() => 2,
            CliError::Output { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::ConfigRead { .. }
            | CliError::ConfigSyntax { .. }
            | CliError::Config { .. } => "config",
            CliError::Compute(e) if e.is_usage() => "model",
            CliError::Compute(_) => "numerical",
            CliError::Output { .. } => "io",
        }
    }

    pub fn pointer(&self) -> Option<&str> {
        match self {
            CliError::Config { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}
