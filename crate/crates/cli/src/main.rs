mod args;
mod commands;
mod direction;
mod output;

use std::process::ExitCode;

use clap::Parser;
use cubature::CubatureError;

use args::{Cli, Command};

/// A check ran to completion but missed its tolerance.
#[derive(Debug)]
pub struct ToleranceFailure(pub String);

impl std::fmt::Display for ToleranceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ToleranceFailure {}

const EXIT_NUMERICAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ToleranceFailure>() {
            return EXIT_NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<CubatureError>() {
            return match e {
                CubatureError::NoFormulaFound { .. }
                | CubatureError::Verification { .. }
                | CubatureError::BlowUp { .. }
                | CubatureError::DirectionNotAttainable { .. }
                | CubatureError::Ellipticity { .. } => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not set thread count: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match &cli.command {
        Command::Verify(a) => commands::verify::run(&cli.global, a),
        Command::Greek(a) => commands::greek::run(&cli.global, a),
        Command::Converge(a) => commands::converge::run(&cli.global, a),
        Command::Diagnostics(a) => commands::diagnostics::run(&cli.global, a),
        Command::Cubature(a) => commands::formula::run(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
