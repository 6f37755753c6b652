//! `alpr`: command-line front end for the plate toolkit.
//!
//! Exit codes are part of the interface: 0 on success, 1 for usage errors
//! (bad flags or values), 2 for data errors (unreadable or invalid input,
//! failed sessions).

mod args;
mod augment;
mod convert;
mod decode;
mod error;
mod eval;
mod files;
mod schedule;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Convert(a) => convert::run(g, a),
        Command::Augment(a) => augment::run(g, a),
        Command::EvalDet(a) => eval::run_det(g, a),
        Command::EvalOcr(a) => eval::run_ocr(g, a),
        Command::Decode(a) => decode::run(g, a),
        Command::Schedule(a) => schedule::run(g, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
