use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match copdiv_cli::run(copdiv_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
