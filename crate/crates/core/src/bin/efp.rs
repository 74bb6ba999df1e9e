use std::process::ExitCode;

use clap::Parser;
use efp::cli::{check_failures, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command).and_then(|outcome| {
        println!("{}", outcome.summary);
        check_failures(&outcome)
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
