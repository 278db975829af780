//! `gdantzig`: fit the generalized Dantzig selector on CSV data, diagnose a
//! design, and run Monte Carlo experiments.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 solver failure,
//! 4 infeasible program.

mod diagnose;
mod error;
mod fit;
mod input;
mod options;
mod sim;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{io_error, Failure};
pub use crate::options::{BoxArg, LossArg, LossArgs, RArg};

#[derive(Parser)]
#[command(name = "gdantzig", version, about = "Generalized Dantzig selector with Lipschitz losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit on a CSV file (columns f1..fM, then y) and write a JSON report.
    Fit(FitArgs),
    /// Coherence, restricted-eigenvalue, tuning and constants report for a design.
    Diagnose(DiagnoseArgs),
    /// Run one simulation configuration and write long-format CSV results.
    Simulate(SimArgs),
    /// Run a sweep over a base configuration and write long-format CSV results.
    Sweep(SimArgs),
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Constraint radius: a positive number, or `auto` for the theoretical value.
    #[arg(long, default_value = "auto")]
    pub r: RArg,
    /// Feasible-set policy; `sample` when --K is given, otherwise `none`.
    #[arg(long = "box")]
    pub box_policy: Option<BoxArg>,
    /// Threshold tau = multiplier * r for the reported support and signs.
    #[arg(long, default_value_t = 1.0)]
    pub threshold_mult: f64,
    /// Threshold at C4 r from the constants chain instead (needs --p-alpha, --p-clip, --s).
    #[arg(long)]
    pub theoretical_threshold: bool,
    #[command(flatten)]
    pub constants: ConstantsArgs,
}

#[derive(Args)]
pub struct ConstantsArgs {
    /// P(|W| <= alpha) for the noise law.
    #[arg(long)]
    pub p_alpha: Option<f64>,
    /// P(|W| <= 2K + alpha) for the noise law.
    #[arg(long)]
    pub p_clip: Option<f64>,
    /// Sparsity level s.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Sparsity level s.
    #[arg(long)]
    pub s: usize,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// Loss for the tuning radius and bounds; omitted means design checks only.
    #[arg(long)]
    pub loss: Option<LossArg>,
    #[arg(long = "K")]
    pub k_bound: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p_alpha: Option<f64>,
    #[arg(long)]
    pub p_clip: Option<f64>,
    /// Seed of the restricted-eigenvalue search.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SimArgs {
    /// JSON configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV destination.
    #[arg(long)]
    pub output: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all logical cores by default.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Pretty JSON to `path`, or to standard output.
pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Solver(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Usage(format!("stdout: {e}"))),
    }
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DANTZIG_LOG", "warn")).init();
    let result = match cli.command {
        Command::Fit(a) => fit::run(&a),
        Command::Diagnose(a) => diagnose::run(&a),
        Command::Simulate(a) => sim::run_simulate(&a),
        Command::Sweep(a) => sim::run_sweep(&a),
    };
    if let Err(f) = result {
        eprintln!("error: {f}");
        std::process::exit(f.code());
    }
}
