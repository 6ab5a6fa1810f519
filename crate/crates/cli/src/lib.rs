//! Experiment driver behind the `psgleco` binary: configuration, problem
//! construction, multi-seed runs, sweeps and file output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod problem;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, sweep, ExperimentReport, SweepReport, SweepStatus};
