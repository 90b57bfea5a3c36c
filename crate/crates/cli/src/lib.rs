//! Batch experiment driver: configuration parsing, experiment and sweep
//! execution, and emitted artifacts (metrics tables, probability
//! heatmaps, reproducibility manifests).

pub mod checks;
pub mod config;
pub mod experiment;
pub mod heatmap;
pub mod manifest;
pub mod metrics;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] brafl_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub use config::{parse_config, ConfigModel};
pub use experiment::{run_experiment, sweep, window_mean, SUMMARY_WINDOW};
pub use manifest::RunManifest;
