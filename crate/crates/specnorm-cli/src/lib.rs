//! Command-line front end: instance generation, solving, certification and witness replay.

pub mod commands;
pub mod error;
pub mod files;

pub use commands::{run, Cli, Command, Outcome};
pub use error::CliError;
