//! Experiment orchestration for magsle: configs, the experiment catalogue,
//! reports with content hashes, and plot data.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod pool;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
pub use experiments::run_experiment;
