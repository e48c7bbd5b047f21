use clap::{Args, Parser, Subcommand};
use kflow_cli::commands::Command;
use kflow_cli::{main_with, Invocation};
use std::path::PathBuf;

/// Moment-map, functional and star-product checks on discretized Kähler tori.
#[derive(Parser)]
#[command(name = "kflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Geometry invariants, condition C sign and Moser flow checks.
    Geom(Common),
    /// Moment map of the Levi-Civita connection and the moment identity.
    Moment(Common),
    /// Trace defects of the Fedosov, Wick and χ star products.
    Star(Common),
    /// Operator checks and preconditioned descent of the functional.
    Optimize(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json and optional artifacts (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Sub::Geom(c) => (Command::Geom, c),
        Sub::Moment(c) => (Command::Moment, c),
        Sub::Star(c) => (Command::Star, c),
        Sub::Optimize(c) => (Command::Optimize, c),
    };
    std::process::exit(main_with(&Invocation { command, config: c.config, out: c.out, seed: c.seed }));
}
