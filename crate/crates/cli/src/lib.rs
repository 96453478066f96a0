//! Command-line front end: configuration parsing, command dispatch and
//! CSV/SVG rendering.

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod plot;

pub use commands::{run, run_table1, Output};
pub use config::{parse_config, CommandKind, Format, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: String, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error(transparent)]
    Core(#[from] seis::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use seis::Error as E;
        match self {
            CliError::Param { .. } | CliError::Usage(_) => 2,
            CliError::Clap(e) => e.exit_code(),
            CliError::Core(E::Parameter { .. } | E::Range(_) | E::InvalidCode { .. } | E::Size { .. } | E::Parse(_)) => 2,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}
