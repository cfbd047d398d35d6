//! Command implementations behind the `breakcast` binary, exposed as a
//! library so integration and acceptance tests can drive them in-process.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use thiserror::Error;

/// Exit-code-bearing error: usage/config problems exit 2, runtime and
/// numeric failures exit 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Output root precedence: CLI flag, config field, `BREAKCAST_OUTPUT_ROOT`,
/// then `./runs`.
pub fn resolve_output_root(
    flag: Option<PathBuf>,
    config: &config::RunConfig,
) -> PathBuf {
    flag.or_else(|| config.output_root.clone())
        .or_else(|| std::env::var_os("BREAKCAST_OUTPUT_ROOT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
