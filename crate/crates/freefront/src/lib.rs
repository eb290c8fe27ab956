//! Configuration, orchestration and file formats around `freefront-core`.
//!
//! The binary is a thin wrapper over [`cli::run`]. Library users can call
//! the `run_*` functions in [`commands`] to get results without files.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
