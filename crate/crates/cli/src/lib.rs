//! Configuration handling and subcommands for the `choquard` binary.

pub mod checks;
pub mod commands;
pub mod config;

pub use commands::{EXIT_ERROR, EXIT_OK, EXIT_REGIME};
pub use config::RunConfig;
