//! Experiment driver for the `quasiloc` library: configuration, subcommands and
//! CSV/JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use quasiloc::Error;

pub use commands::{run, Artifacts, COMMANDS};
pub use config::{resolve_defaults, validate, ExperimentConfig, Validation};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// The reader of standard output went away.
    #[error("output closed")]
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
            CliError::Closed => 0,
        }
    }

    pub fn messages(&self) -> Vec<String> {
        match self {
            CliError::Validation(v) => v.clone(),
            CliError::Numerical(s) | CliError::Io(s) => vec![s.clone()],
            CliError::Closed => Vec::new(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ResonantFrequency { .. }
            | Error::ResonantEnergy { .. }
            | Error::IllConditioned { .. }
            | Error::NoEigenvalue
            | Error::K0NotFound { .. }
            | Error::NoModes => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(vec![e.to_string()]),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Io(e.to_string())
    }
}
