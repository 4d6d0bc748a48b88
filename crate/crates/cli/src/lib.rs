//! Command-line front end: configuration, run dispatch and output handling.

pub mod config;
pub mod output;
pub mod run;

pub use config::{validate_config, ConfigError, ExperimentConfig, ExperimentKind};
pub use run::{run, RunOptions, RunOutcome};
