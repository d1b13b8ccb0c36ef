//! Experiment harness for the capacity library: JSON experiment configs,
//! derivative sweeps with CSV output, convergence fitting, and self checks.

pub mod config;
pub mod csv;
pub mod error;
pub mod fit;
pub mod run;
pub mod selftest;

pub use config::{ExperimentConfig, ExperimentKind, ShapeSpec};
pub use error::{CliError, Result};
pub use fit::{fit_convergence, FitResult};
