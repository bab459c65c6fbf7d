use std::fmt;
use std::process::ExitCode;

/// Exit codes: 0 success, 1 IO, 2 configuration or validation, 3 divergence.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io { context: String, source: std::io::Error },
    Diverged { step: usize },
    Core(sindex_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io { .. } => ExitCode::from(1),
            CliError::Config(_) | CliError::Core(_) => ExitCode::from(2),
            CliError::Diverged { .. } => ExitCode::from(3),
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Io { context, source } => write!(f, "{context}: {source}"),
            CliError::Diverged { step } => {
                write!(f, "iterates diverged at step {step}; partial output kept")
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<sindex_core::Error> for CliError {
    fn from(e: sindex_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
