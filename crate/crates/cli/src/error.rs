use mlocrisk_core::Error as CoreError;
use std::path::Path;
use thiserror::Error;

/// Process exit status for configuration and parse failures.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit status when an iterate diverges.
pub const EXIT_DIVERGED: i32 = 3;
/// Process exit status for every other failure.
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{file}: {message}")]
    Config { file: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("cannot serialize output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                CoreError::DivergedState { .. } => EXIT_DIVERGED,
                CoreError::InvalidConfig(_) | CoreError::InvalidParams(_) | CoreError::Parse { .. } => EXIT_CONFIG,
                _ => EXIT_OTHER,
            },
            CliError::Io { .. } | CliError::Json(_) => EXIT_OTHER,
        }
    }
}
