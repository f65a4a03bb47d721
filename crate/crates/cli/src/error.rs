use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use spamlens_core::artifact::ArtifactError;
use spamlens_core::corpus::CorpusError;
use spamlens_core::eval::EvalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Failed(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn input(path: &Path, message: impl ToString) -> Self {
        CliError::Input { path: path.to_owned(), message: message.to_string() }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io { path: path.to_owned(), source }
    }

    /// Process exit code. 2 is reserved for argument parsing errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input { .. } | CliError::Io { .. } => 3,
            CliError::Invalid(_) => 4,
            CliError::Failed(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input { .. } => "input",
            CliError::Io { .. } => "io",
            CliError::Invalid(_) => "invalid_config",
            CliError::Failed(_) => "failed",
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self, command: &str) -> Value {
        json!({"error": {"command": command, "kind": self.kind(), "exit_code": self.exit_code(), "message": self.to_string()}})
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Recipe(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub(crate) fn corpus_err(path: &Path) -> impl FnOnce(CorpusError) -> CliError + '_ {
    move |e| CliError::input(path, e)
}
