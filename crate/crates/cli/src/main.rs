//! `infermeter`: command-line driver.
//!
//! Exit status is 0 on success, 1 when `--strict` is set and a lint fails,
//! and 2 on any error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Outcome;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Bench(a) => commands::bench_cmd(a),
        Command::ServeMock(a) => commands::serve_mock_cmd(a),
        Command::ProfilePrefill(a) => commands::profile_cmd(a),
        Command::Capacity(a) => commands::capacity_cmd(a),
        Command::FluidRate(a) => commands::fluid_rate_cmd(a),
        Command::Report(a) => commands::report_cmd(a),
        Command::Compare(a) => commands::compare_cmd(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::LintFailure) => {
            eprintln!("lint failures present (--strict)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
