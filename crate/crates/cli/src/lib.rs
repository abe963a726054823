//! Batch front-end for `agecontrol-core`: TOML experiment configs in, CSV
//! tables and JSON summaries out.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

pub use config::{parse_config, load_config, CommandName, ExperimentConfig};
pub use error::{CliError, CliResult};
