//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 verification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    build_systems, cmd_resolvent, cmd_simulate, cmd_spectrum, cmd_verify, Check, Provenance, ResolventSummary,
    SimulateSummary, SpectrumSummary, VerifyReport,
};
pub use config::{load_config, ExperimentConfig, LambdaGrid, MAX_MODE};

use crate::error::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "platewave", version, about = "Plate-membrane transmission simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-step the modes and fit energy decay.
    Simulate(RunArgs),
    /// Eigenvalues near the configured shift.
    Spectrum(RunArgs),
    /// Resolvent-norm sweep along the imaginary axis.
    Resolvent(RunArgs),
    /// Run the invariant suite.
    Verify(RunArgs),
    /// Print a complete configuration with every default filled in.
    Defaults,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Validation { .. } | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn prepare(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = load_config(&args.config).map_err(|e| match e {
        Error::Io { path, source } => Error::Config { path, message: source.to_string() },
        other => other,
    })?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::validation("threads", "must be >= 1"));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(cfg)
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("summary serializes"));
}

pub fn run(cli: Cli) -> ExitCode {
    let outcome = match &cli.command {
        Command::Defaults => {
            println!("{}", ExperimentConfig::with_params(1.0, 1.0, 0.3).to_json());
            return ExitCode::SUCCESS;
        }
        Command::Simulate(a) => prepare(a).and_then(|c| cmd_simulate(&c)).map(|s| {
            print_json(&s);
            true
        }),
        Command::Spectrum(a) => prepare(a).and_then(|c| cmd_spectrum(&c)).map(|(_, s)| {
            print_json(&s);
            true
        }),
        Command::Resolvent(a) => prepare(a).and_then(|c| cmd_resolvent(&c)).map(|s| {
            print_json(&s);
            true
        }),
        Command::Verify(a) => prepare(a).and_then(|c| cmd_verify(&c)).map(|r| {
            for c in &r.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !r.all_passed {
                eprintln!("failed invariants: {}", r.failed().join(", "));
            }
            r.all_passed
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFICATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
