//! Library half of the `bcrs` binary: argument types, the subcommands and
//! their JSON/CSV encodings.

pub mod args;
pub mod canonical;
pub mod commands;
mod output;

pub use commands::{run, CliError, Outcome};
