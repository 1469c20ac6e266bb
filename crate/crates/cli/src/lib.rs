//! Experiment driver for magpack: configuration, experiments, CSV output and
//! rate fits.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod selftest;
pub mod symbols;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiments::{run, Check, Outcome, RunOptions};
