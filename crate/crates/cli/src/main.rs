use std::process::ExitCode;

use bcrs_cli::args::Cli;
use bcrs_cli::{run, CliError};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("bcrs: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Compute(_) => ExitCode::from(1),
            }
        }
    }
}
