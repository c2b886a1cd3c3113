//! Configuration-driven experiment runner for kahler-lab: scenario registry, drivers for the
//! solvers, flow and energies, and the acceptance battery.

pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod output;
pub mod scenarios;
pub mod suite;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
