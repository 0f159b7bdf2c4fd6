//! Command-line front end: configuration, orchestration and file formats.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, Options, Status};
pub use config::{parse_config, ConfigError, Mode, RunSpec};
