//! Config-driven driver for `ktrunc-core`: builds a model from a TOML
//! manifest, runs the truncation analysis and writes JSON reports and CSV
//! sweep tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod problem;
pub mod report;

pub use config::{Config, OUTPUT_DIR_ENV};
pub use error::{CliError, Result, EXIT_ASSUMPTION, EXIT_CONFIG, EXIT_NUMERICAL};
