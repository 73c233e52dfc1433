//! Experiment orchestration behind the `locker` command.

pub mod config;
pub mod pipeline;

pub use config::{ExperimentConfig, Scale};
pub use pipeline::Run;
