//! Configuration, orchestration and CSV output for the `regime-stop`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_bench, cmd_oracle, cmd_solve, cmd_validate};
pub use config::{RawConfig, RunConfig};
pub use error::CliError;
