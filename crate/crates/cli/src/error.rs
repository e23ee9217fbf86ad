use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    /// Malformed input data file.
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Module(#[from] sideband_osc::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// A self-check subcommand found a mismatch.
    #[error("{0}")]
    Check(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Input(_) => "InputError",
            CliError::Module(sideband_osc::Error::Config(_)) => "ConfigError",
            CliError::Module(e) => e.class(),
            CliError::Io { .. } => "IoError",
            CliError::Check(_) => "CheckFailed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Module(sideband_osc::Error::Config(_)) => 2,
            CliError::Module(_) | CliError::Check(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
