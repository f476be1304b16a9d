mod args;
mod cache;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Bad command-line input; exits with code 3.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_NUMERIC: u8 = 2;
const EXIT_USAGE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<magicfn::Error>() {
            use magicfn::Error::*;
            return match e {
                InvalidPrecision(_) | UnsupportedArgument(_) | OutOfRange(_) | OutOfScope(_) | Parse(_)
                | DegenerateSchedule(_) => EXIT_USAGE,
                _ => EXIT_NUMERIC,
            };
        }
    }
    EXIT_NUMERIC
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Bound(a) => commands::bound(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Atlas(a) => commands::atlas(a),
        Command::Values(a) => commands::values(a),
        Command::Taylor(a) => commands::taylor(a),
        Command::Mellin(a) => commands::mellin(a),
        Command::Fprime(a) => commands::fprime(a),
        Command::Ratio(a) => commands::ratio(a),
        Command::Energy(a) => commands::energy(a),
        Command::Single(a) => commands::single(a),
        Command::Shells(a) => commands::shells(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
