//! `cmt`: synthetic data, training, transfer, the segmentation-to-infection
//! pipeline and evaluation from the command line.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 bad data, 4 model or weights
//! problems.

mod args;
mod commands;
mod error;
mod store;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::Status;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Status::Argument as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Train(a) => commands::train(a),
        Command::Transfer(a) => commands::transfer(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
