//! Configuration, instance generators and runners for community exploration
//! experiments. The `comexp` binary is a thin command-line layer over this
//! crate.

pub mod config;
pub mod error;
pub mod generate;
pub mod report;
pub mod runners;

pub use config::{DistributionSpec, ExperimentConfig, ExperimentKind, Overrides};
pub use error::{ExpError, Result};
