use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes. Usage errors exit with 2 (reported by clap).
pub mod exit {
    pub const FILE: i32 = 3;
    pub const FORMAT: i32 = 4;
    pub const PARAMETER: i32 = 5;
    pub const NETWORK: i32 = 6;
    pub const PROTOCOL: i32 = 7;
    pub const CHECK_FAILED: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("{context}: {message}")]
    Format { context: String, message: String },
    #[error("{0}")]
    Parameter(String),
    #[error("{0}")]
    Network(String),
    #[error("{0}")]
    Protocol(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::File { .. } => exit::FILE,
            CliError::Format { .. } => exit::FORMAT,
            CliError::Parameter(_) => exit::PARAMETER,
            CliError::Network(_) => exit::NETWORK,
            CliError::Protocol(_) => exit::PROTOCOL,
            CliError::CheckFailed(_) => exit::CHECK_FAILED,
        }
    }

    pub fn file(path: &Path, source: std::io::Error) -> Self {
        CliError::File { path: path.to_path_buf(), source }
    }

    pub fn format(context: impl std::fmt::Display, message: impl std::fmt::Display) -> Self {
        CliError::Format { context: context.to_string(), message: message.to_string() }
    }
}

impl From<ppdt::tree::TreeError> for CliError {
    fn from(e: ppdt::tree::TreeError) -> Self {
        use ppdt::tree::TreeError;
        match e {
            TreeError::Parameter(_) | TreeError::He(_) => CliError::Parameter(e.to_string()),
            other => CliError::format("tree", other),
        }
    }
}

impl From<ppdt::client::ClientError> for CliError {
    fn from(e: ppdt::client::ClientError) -> Self {
        use ppdt::client::ClientError;
        match e {
            ClientError::Connect { .. } | ClientError::Timeout(_) => CliError::Network(e.to_string()),
            ClientError::FeatureRange { .. } => CliError::Parameter(e.to_string()),
            other => CliError::Protocol(other.to_string()),
        }
    }
}

impl From<ppdt::harness::TopologyError> for CliError {
    fn from(e: ppdt::harness::TopologyError) -> Self {
        use ppdt::harness::TopologyError;
        match e {
            TopologyError::Io { .. } => CliError::Network(e.to_string()),
            TopologyError::Tree(t) => t.into(),
            TopologyError::Client(c) => c.into(),
            other => CliError::Protocol(other.to_string()),
        }
    }
}
