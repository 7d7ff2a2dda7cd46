//! Experiment runner: configuration, execution, manifests and reports.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use report::emit_report;
pub use runner::{run, run_in_pool, Assertion, RunOutcome};
