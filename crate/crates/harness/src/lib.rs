//! Experiment harness for the WLAN MAC simulator: configuration files,
//! deterministic Monte-Carlo orchestration, CSV emission, and the
//! checkpoint lifecycle for the learned-access stations.

pub mod config;
pub mod experiment;
pub mod seeds;

pub use config::{ExperimentConfig, Scheme};
pub use experiment::{run_experiment, ResultRow, TrialTag};
