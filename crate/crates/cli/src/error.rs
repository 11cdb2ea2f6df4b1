use idtrace_bench::BenchError;
use idtrace_core::{CoreSetError, TraceError, UniverseError};
use thiserror::Error;

/// Exit status for malformed arguments or configuration.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for data the command cannot work with.
pub const EXIT_DATA: u8 = 3;
/// Exit status for file, network or computation-budget failures.
pub const EXIT_RESOURCE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Resource(_) => EXIT_RESOURCE,
        }
    }

    /// Prefixes the message, keeping the category.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Resource(m) => CliError::Resource(format!("{what}: {m}")),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Resource(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Resource(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Resource(err.to_string())
    }
}

impl From<UniverseError> for CliError {
    fn from(err: UniverseError) -> Self {
        match err {
            UniverseError::Io(_) => CliError::Resource(err.to_string()),
            UniverseError::Csv(ref e) if e.is_io_error() => CliError::Resource(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<CoreSetError> for CliError {
    fn from(err: CoreSetError) -> Self {
        match err {
            CoreSetError::ResourceLimit { .. } => CliError::Resource(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<TraceError> for CliError {
    fn from(err: TraceError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(err: BenchError) -> Self {
        match err {
            BenchError::Config(_) => CliError::Usage(err.to_string()),
            BenchError::Io { .. } => CliError::Resource(err.to_string()),
            BenchError::Universe(e) => CliError::from(e).context("loading dataset"),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<idtrace_service::ApiError> for CliError {
    fn from(err: idtrace_service::ApiError) -> Self {
        if err.status.is_server_error() {
            CliError::Resource(err.to_string())
        } else {
            CliError::Data(err.to_string())
        }
    }
}
