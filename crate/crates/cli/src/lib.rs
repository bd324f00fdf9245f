//! Experiment harness for the `levy-lmm` engine: configuration, the
//! `price`, `compare`, `bench` and `validate` commands, and their CSV and
//! manifest outputs.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{bench, compare, finish, price, simulate_config, validate, CommandReport};
pub use config::{ConfigError, ExperimentConfig};
