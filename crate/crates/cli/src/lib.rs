//! Command-line front end: argument parsing, run configuration and the
//! `reproduce`, `train`, `score`, `pca` and `gen-data` commands.

pub mod args;
pub mod commands;
pub mod config;

pub use args::Cli;
pub use commands::{reproduce, run, Reproduction, MANIFEST};
pub use config::{KeyValues, RunConfig, SyntheticSpec};
