//! Batch driver: configuration files, subcommand dispatch and report emission.

pub mod config;
pub mod output;
pub mod run;
