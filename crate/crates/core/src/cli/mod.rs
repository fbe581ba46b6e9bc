//! Command-line front end: config files, reports, and experiment runs.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use runner::{dump, exit_code, list_experiments, run, RunOutcome};
