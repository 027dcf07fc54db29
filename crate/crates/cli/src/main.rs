//! `semg` binary: argument parsing, worker-pool setup, and the mapping
//! from error categories to process exit codes.
//!
//! Exit codes: 0 success; 2 usage or configuration error; 3 data-contract
//! or input error; 4 numeric failure (e.g. non-convergence under
//! `--strict`).

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use semg_core::ErrorCategory;

fn main() -> ExitCode {
    let cli = args::Cli::parse();

    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("error: initializing {} worker threads: {e}", cli.jobs);
            return ExitCode::from(2);
        }
    }

    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data | ErrorCategory::Io => 3,
                ErrorCategory::Numeric => 4,
            })
        }
    }
}
