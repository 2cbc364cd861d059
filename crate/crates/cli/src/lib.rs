//! Command-line front end: TOML experiment configs, the `simulate`,
//! `sweep`, `steady` and `verify` subcommands, and versioned output files.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
