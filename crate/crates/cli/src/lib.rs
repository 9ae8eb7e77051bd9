//! Batch front end: a TOML run configuration drives the `solve`, `verify`,
//! `bounds` and `oracle` subcommands, each writing CSV (and PGM) artifacts.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{cmd_bounds, cmd_oracle, cmd_solve, cmd_verify, Options};
pub use config::{parse_config, parse_config_str, RunConfig};

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{0}")]
    Abort(String),

    #[error("{0}")]
    Failure(String),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Abort(_) => 3,
            CliError::Failure(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o: {e}"))
    }
}
