//! Command-line driver: flag and config-file resolution, the subcommands, and
//! CSV/JSON output.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{resolve, Cli, Command, RunConfig};
