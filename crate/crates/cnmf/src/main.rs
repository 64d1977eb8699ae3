use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = cnmf::cli::Cli::parse();
    match cnmf::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
