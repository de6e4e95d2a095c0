//! Experiment runner behind the `bfswitch` binary.
//!
//! [`commands`] holds one entry point per subcommand; each takes plain
//! arguments and returns the text to print, so the binary stays a thin clap
//! wrapper and the runs can be driven from tests.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, LidChoice};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

impl CliError {
    /// 2 for a failed delivery check, 3 for bad input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 2,
            CliError::Input(_) => 3,
            CliError::Io { .. } | CliError::Csv { .. } => 1,
        }
    }
}
