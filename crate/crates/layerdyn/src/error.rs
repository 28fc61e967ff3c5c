use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error("{op} failed: {source}")]
    Numeric { op: &'static str, source: layerdyn_core::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } => 2,
            CliError::Numeric { .. } | CliError::Write { .. } => 3,
        }
    }
}

pub(crate) fn numeric(op: &'static str) -> impl FnOnce(layerdyn_core::Error) -> CliError {
    move |source| CliError::Numeric { op, source }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
