//! `poverty`: solve, simulate and sweep minimum-lifetime-poverty problems.
//!
//! Every command that writes files also writes `manifest.json` next to
//! them; `poverty replay` reruns a manifest and checks the digests.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "poverty", version, about = "Minimum expected lifetime poverty with a ruin penalty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value function and optimal policy on a wealth grid.
    Solve(SolveArgs),
    /// Monte Carlo estimate of the expected cost of a policy.
    Simulate(SimulateArgs),
    /// One parameter varied over a list of values.
    Sweep(SweepArgs),
    /// Check a problem file and print its derived constants.
    Validate {
        spec: PathBuf,
    },
    /// Rerun a manifest and compare the outputs with the recorded digests.
    Replay {
        manifest: PathBuf,
        /// Directory for the regenerated files.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Closed,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    /// The optimal policy (closed form, or the FD table for staircases).
    Star,
    /// The ruin-probability strategy.
    Zero,
    /// No risky investment.
    None,
    /// A `w,pi` CSV given with `--policy-file`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Value,
    Policy,
    #[value(name = "y_da")]
    YDa,
    #[value(name = "z_da")]
    ZDa,
}

/// Grid and policy-iteration settings shared by the commands.
#[derive(Args, Debug, Default, Clone)]
pub struct GridArgs {
    /// Number of grid nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Upper end of the grid (proportional consumption only).
    #[arg(long)]
    w_max: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SolveArgs {
    /// Problem file (JSON).
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "closed")]
    method: Method,
    #[command(flatten)]
    grid: GridArgs,
    /// JSON file with default settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    spec: PathBuf,
    /// Starting wealth.
    #[arg(long)]
    w0: f64,
    #[arg(long, value_enum, default_value = "star")]
    policy: PolicyChoice,
    #[arg(long)]
    policy_file: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_cap: Option<f64>,
    /// Brownian-bridge correction for crossings between grid points.
    #[arg(long)]
    bridge: bool,
    #[arg(long)]
    level_refinement: Option<u32>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SweepArgs {
    spec: PathBuf,
    /// One of l, rho, lambda, mu, sigma, c, kappa.
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, value_enum, default_value = "value")]
    observable: Observable,
    /// Wealth levels at which value or policy are reported.
    #[arg(long, value_delimiter = ',')]
    at_w: Vec<f64>,
    #[arg(long, value_enum, default_value = "closed")]
    method: Method,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Exit status: 2 for invalid input, 3 for numerical failure, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    use lifetime_poverty::Error as E;
    if err.downcast_ref::<commands::InvalidInput>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(E::Infeasible(_) | E::Domain { .. } | E::Config(_) | E::Policy { .. } | E::Json(_)) => 2,
        Some(
            E::NonConvergence { .. }
            | E::ConvexityLoss { .. }
            | E::Bracket { .. }
            | E::Consistency { .. }
            | E::PropertyViolation(_),
        ) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Validate { spec } => commands::validate(&spec),
        Command::Replay { manifest, out } => commands::replay(&manifest, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
