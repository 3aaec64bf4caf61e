//! Batch pipeline driver: config-defined corrections and analyses over
//! image series with a hashed output manifest.

pub mod blocks;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run, run_seeded};
