use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] std::io::Error),

    #[error(transparent)]
    Solver(#[from] regime_stop::Error),

    #[error("schema mismatch in {path}: {msg}", path = .0.display(), msg = .1)]
    Schema(PathBuf, String),

    #[error("{0}")]
    Argument(String),
}
