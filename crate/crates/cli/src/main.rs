//! `eigenmood` command-line pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 data validation, 3 internal.

mod args;
mod commands;
mod svg;

use std::process::ExitCode;

use clap::Parser;
use eigenmood::Error;

use crate::args::{Cli, Command};

/// Bad invocation that clap cannot detect on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A run-directory file that an earlier stage should have written.
#[derive(Debug)]
pub struct MissingStage {
    pub stage: &'static str,
    pub path: std::path::PathBuf,
}

impl std::fmt::Display for MissingStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "missing {} output {} (run `eigenmood {}` first)",
            self.stage,
            self.path.display(),
            self.stage
        )
    }
}

impl std::error::Error for MissingStage {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<MissingStage>() || cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::KMaxTooLarge { .. } | Error::InvalidAxis { .. } => EXIT_USAGE,
                Error::AllFiltered { .. } => EXIT_DATA,
                e if e.is_data_error() => EXIT_DATA,
                _ => EXIT_INTERNAL,
            };
        }
    }
    EXIT_INTERNAL
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let flags = &cli.flags;
    std::fs::create_dir_all(&flags.out)?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest::run(flags, a),
        Command::Profile(a) => commands::profile::run(flags, a),
        Command::Spectral(a) => commands::spectral::run(flags, a),
        Command::Validate(a) => commands::validate::run(flags, a),
        Command::Report(a) => commands::report::run(flags, a),
        Command::AnnotateMock(a) => commands::annotate::run(flags, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
