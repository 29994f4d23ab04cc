mod args;
mod commands;
mod experiment;
mod manifest;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Exit status for a run that completed.
const EXIT_OK: u8 = 0;
/// Bad flags, arguments or plan.
const EXIT_USAGE: u8 = 2;
/// Unreadable, malformed or unsuitable input data.
const EXIT_DATA: u8 = 3;
/// A broken internal invariant.
const EXIT_INTERNAL: u8 = 4;

/// An argument problem the parser could not catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Something that must not happen, such as a replay that does not reproduce.
#[derive(Debug)]
pub struct InternalError(pub String);

impl fmt::Display for InternalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InternalError {}

/// Input data that parsed but cannot be used, such as failed experiment runs.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use subaug::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if cause.is::<InternalError>() {
            return EXIT_INTERNAL;
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidArgument(_) | E::InventoryTooSmall { .. } | E::BudgetTooSmall { .. } => EXIT_USAGE,
                E::Inconsistent(_) | E::ContractViolation(_) => EXIT_INTERNAL,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_INTERNAL
}

/// The error chain joined with `: `, skipping causes the previous message
/// already ends with.
fn describe(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if parts.last().is_some_and(|p| p.ends_with(&text)) {
            continue;
        }
        parts.push(text);
    }
    parts.join(": ")
}

/// Runs a parsed command line. `argv` is what gets recorded for replay.
pub fn execute(cli: &Cli, argv: &[String]) -> anyhow::Result<()> {
    let ctx = commands::Context {
        seed: cli.seed,
        json: cli.json,
        argv: argv.to_vec(),
    };
    match &cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Tokenize(c) => commands::tokenize(&ctx, c),
        Command::Lm(c) => commands::lm(&ctx, c),
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Mix(a) => commands::mix(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Experiment(a) => experiment::run(&ctx, a),
        Command::Replay(a) => commands::replay(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    // `--cache` only changes what gets redone, so replays never need it.
    let argv: Vec<String> = std::env::args().skip(1).filter(|a| a != "--cache").collect();
    match execute(&cli, &argv) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
