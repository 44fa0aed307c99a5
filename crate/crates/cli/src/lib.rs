//! Command-line front end: file formats, reports and subcommands.

pub mod commands;
pub mod decimal;
pub mod error;
pub mod files;
pub mod report;

pub use commands::{run, Cli};
pub use error::CliError;
