//! Experiment driver: configuration, datasets, training, sweeps, reports.

pub mod campaign;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod svg;
pub mod sweep;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
