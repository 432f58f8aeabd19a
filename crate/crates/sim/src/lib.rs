//! Monte-Carlo experiment runner for the turbo / Baum-Welch receiver.
//!
//! [`config`] parses the plain-text experiment description, [`experiment`]
//! simulates seeded frames and aggregates their traces into CSV rows.

pub mod config;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, ExperimentError, ResultRow};
