//! Synthetic data, diagnostics, experiment orchestration and the validation
//! suites behind the `stmala` command-line tool.

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
