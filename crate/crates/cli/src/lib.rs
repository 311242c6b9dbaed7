//! Experiment runner: configuration, artifact layout, and the commands
//! behind the `mimo-detect` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Process exit code: 2 config, 3 missing artifact, 4 divergence,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<mimo_detect::mmnet::TrainError> for CliError {
    fn from(e: mimo_detect::mmnet::TrainError) -> Self {
        use mimo_detect::mmnet::TrainError;
        match e {
            TrainError::Diverged { .. } => CliError::Divergence(e.to_string()),
            TrainError::BankRequired => CliError::MissingArtifact(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<mimo_detect::bank::BankError> for CliError {
    fn from(e: mimo_detect::bank::BankError) -> Self {
        use mimo_detect::bank::BankError;
        match &e {
            BankError::PretrainFailed { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
