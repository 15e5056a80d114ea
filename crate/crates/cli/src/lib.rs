//! Command-line front end for the impulse-control solver.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::CliError;
pub use config::RunConfig;
