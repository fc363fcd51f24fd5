//! Experiment runner: configuration, the CLI subcommands as library
//! functions, CSV result files and SVG plots.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod results;

pub use config::{load_config, parse_config, AgentChoice, ExperimentConfig};
pub use error::BenchError;
