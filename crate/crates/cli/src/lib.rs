//! Command-line driver: experiment configs, checkpoints and the subcommands.

pub mod checkpoint;
pub mod commands;
pub mod config;

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, RunKey};
