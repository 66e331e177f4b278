//! `arqg`: command-line front end for the reservation-game library.
//!
//! JSON goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 2 invalid parameters, 3 I/O failure, 4 internal invariant violated.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::CliError;

#[derive(Parser)]
#[command(name = "arqg", version, about = "Advance-reservation queueing games: equilibria, revenue, learning and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Waits, utilization and critical costs of a queue.
    Analyze(AnalyzeArgs),
    /// All equilibria for a reservation fee.
    Equilibria(EquilibriaArgs),
    /// Plot-ready CSV sweeps.
    Sweep(SweepArgs),
    /// Best-response learning runs.
    Learn(LearnArgs),
    /// Discrete-event simulation of the queue.
    Simulate(SimulateArgs),
}

/// Flags shared by every command.
#[derive(Args, Clone)]
struct Common {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Arrival rate λ.
    #[arg(long = "lambda")]
    lambda: Option<f64>,
    /// Service rate μ.
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Threshold at which to report the two waits.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct EquilibriaArgs {
    #[command(flatten)]
    common: Common,
    /// Reservation fee C.
    #[arg(long)]
    cost: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SweepKind {
    /// tau, cost: the cost that makes each threshold an equilibrium.
    CostCurve,
    /// tau, fee, revenue: revenue when each threshold is played.
    Revenue,
    /// rho, static_revenue, guaranteed_revenue, poc.
    Poc,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    what: Option<SweepKind>,
    /// Number of rows, at least 2.
    #[arg(long)]
    points: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum LearnMode {
    Strategy,
    Action,
    /// Both modes on common random numbers.
    Compare,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    mode: Option<LearnMode>,
    #[arg(long)]
    cost: Option<f64>,
    /// Initial belief β.
    #[arg(long)]
    belief: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    step_duration: Option<f64>,
    /// Falls back to $ARQG_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Replications for `--mode compare`.
    #[arg(long)]
    replications: Option<usize>,
    /// Per-step CSV trace.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum EngineArg {
    Priority,
    Calendar,
    Both,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Fraction of the horizon discarded as warmup.
    #[arg(long)]
    warmup: Option<f64>,
    /// Falls back to $ARQG_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Width of the reported priority bands.
    #[arg(long)]
    band_width: Option<f64>,
    /// Per-customer CSV trace of the first engine.
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Equilibria(a) => commands::equilibria(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Learn(a) => commands::learn(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("arqg: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl From<arqg::Error> for CliError {
    fn from(e: arqg::Error) -> Self {
        CliError::Param(e.to_string())
    }
}
