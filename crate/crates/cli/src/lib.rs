//! Experiment runner for the blockqkd simulator: INI-configured sweeps with
//! JSON and CSV reports, the reduction-equivalence suite, and a report
//! viewer.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
