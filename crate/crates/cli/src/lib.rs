//! Batch experiment harness for the edlab laboratory: configuration
//! parsing, named experiment recipes, and report emission.

pub mod config;
pub mod kernelio;
pub mod recipes;
pub mod report;
pub mod state;

pub use config::ExperimentConfig;
pub use report::{RunReport, Summary};
