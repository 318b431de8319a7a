#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{Cli, Command};

/// Exit status: 0 pass, 1 criterion failed, 2 usage or I/O error.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Calibrate(a) => commands::calibrate(&cli.global, a),
        Command::Qualify(a) => commands::qualify(&cli.global, a),
        Command::Simulate(a) => commands::simulate(&cli.global, a),
        Command::Sweep(a) => commands::sweep(&cli.global, a),
        Command::Extract(a) => commands::extract(&cli.global, a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
