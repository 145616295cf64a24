//! Library side of the `safezone` command-line tool: argument definitions,
//! configuration, report formatting and the validation battery. `main.rs`
//! only parses arguments and hands them to [`app::run`].

pub mod app;
pub mod checks;
pub mod config;
pub mod report;

use safezone_core::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    /// Bad command line (also what clap uses).
    pub const USAGE: u8 = 2;
    pub const CONFIG_PARSE: u8 = 3;
    pub const VALIDATION: u8 = 4;
    pub const NUMERICAL: u8 = 5;
    pub const CHECK_FAILED: u8 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{failed} of {total} surface cells failed")]
    FailedCells { failed: usize, total: usize },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error("writing output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Output(_) => exit::IO,
            CliError::Usage(_) => exit::USAGE,
            CliError::Config(_) => exit::CONFIG_PARSE,
            CliError::Core(e) if e.is_numerical() => exit::NUMERICAL,
            CliError::Core(_) => exit::VALIDATION,
            CliError::FailedCells { .. } => exit::NUMERICAL,
            CliError::ChecksFailed { .. } => exit::CHECK_FAILED,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
