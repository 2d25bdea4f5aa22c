//! `fsbp`: quadrature rules, FSBP operators and IBVP experiments from a
//! single TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "fsbp", version, about = "Generalised Gauss quadrature and function-space SBP operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Node mode: open, closed, ggq, gglq, equispaced or classical-gll.
    #[arg(long)]
    mode: Option<String>,
    /// Proceed even when the Tchebyshev screen fails.
    #[arg(long)]
    force_tchebyshev: bool,
    /// Seed for every randomised check.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the quadrature rule for the configured space.
    Rule(Common),
    /// Build and verify the operator for the configured space.
    Operator {
        #[command(flatten)]
        common: Common,
        /// Use the nodes and weights of a rule written by `rule`.
        #[arg(long)]
        rule: Option<PathBuf>,
    },
    /// Verify an operator file or a published table against the configured space.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Operator JSON written by `operator`.
        #[arg(long, conflicts_with = "fixture")]
        operator: Option<PathBuf>,
        /// Name of a published table (see `fixtures`).
        #[arg(long)]
        fixture: Option<String>,
    },
    /// Run one IBVP solve.
    Solve(Common),
    /// Run a convergence study.
    Converge(Common),
    /// Write the published reference tables and how the computed ones compare.
    Fixtures(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rule(c) => commands::rule(&c),
        Command::Operator { common, rule } => commands::operator(&common, rule.as_deref()),
        Command::Verify { common, operator, fixture } => commands::verify(&common, operator.as_deref(), fixture.as_deref()),
        Command::Solve(c) => commands::solve(&c),
        Command::Converge(c) => commands::converge(&c),
        Command::Fixtures(c) => commands::fixtures(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.kind.code())
        }
    }
}
