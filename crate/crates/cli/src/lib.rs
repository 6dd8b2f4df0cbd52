//! Experiment driver: scene generation, naming-game training, evaluation
//! and report export, all keyed by seed and variant under one output
//! directory.

pub mod config;
pub mod eval;
pub mod pipeline;
pub mod report;

use std::fmt;

pub use config::{parse_seed_set, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or missing files.
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<emergelex_core::Error> for CliError {
    fn from(e: emergelex_core::Error) -> Self {
        use emergelex_core::Error as E;
        match e {
            E::Numerical(_) | E::Undefined(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
