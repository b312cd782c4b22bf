//! Experiment orchestration: configuration, runner, reports.

mod config;
mod report;
mod runner;

pub use config::{ExperimentConfig, ExperimentKind, ExperimentSection, MarksSection, SystemSection};
pub use report::CheckResult;
pub use runner::{run_experiment, RunSummary};
