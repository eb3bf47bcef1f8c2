use std::io;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] zeno_core::Error),

    #[error("output error: {0}")]
    Io(#[from] io::Error),

    #[error("selftest failed: {0}")]
    SelfTest(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(1),
            CliError::Numerical(_) | CliError::Io(_) => ExitCode::from(2),
            CliError::SelfTest(_) => ExitCode::from(3),
        }
    }
}
