use std::process::ExitCode;

use clap::Parser;
use platewave::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
