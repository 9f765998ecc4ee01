use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EPSILON_HELP: &str = "Relative-error bounds in percent, comma separated. A bound of p% \
admits models whose root-mean-square relative error is at most p%, i.e. \
sum_i (f(x_i)/y_i - 1)^2 <= n (p/100)^2 over the n observations.";

#[derive(Debug, Parser)]
#[command(name = "exactsr", version, about = "Minimum-complexity symbolic regression with optimality certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for a single error bound.
    Solve(RunArgs),
    /// Solve for each of several error bounds.
    Sweep(RunArgs),
    /// Compare the search against exhaustive enumeration.
    Oracle(RunArgs),
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Kepler,
    Pendulum,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Kepler => "kepler",
            Preset::Pendulum => "pendulum",
        }
    }

    pub fn default_rows(self) -> usize {
        match self {
            Preset::Kepler => 8,
            Preset::Pendulum => 10,
        }
    }

    pub fn default_noise(self) -> f64 {
        match self {
            Preset::Kepler => 0.01,
            Preset::Pendulum => 0.005,
        }
    }

    pub fn default_data_seed(self) -> u64 {
        match self {
            Preset::Kepler => 42,
            Preset::Pendulum => 7,
        }
    }

    pub fn default_ops(self) -> &'static str {
        match self {
            Preset::Kepler => "+,*,sqrt,cbrt",
            Preset::Pendulum => "+,-,*,sqrt,cbrt",
        }
    }

    pub fn target(self) -> &'static str {
        match self {
            Preset::Kepler => "d",
            Preset::Pendulum => "t_j",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    NodeCount,
    Weighted,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, value_name = "PATH", conflicts_with = "gen")]
    pub data: Option<PathBuf>,
    /// Synthetic dataset to generate (default kepler when no --data).
    #[arg(long, value_enum)]
    pub gen: Option<Preset>,
    /// Target column (required with --data).
    #[arg(long, value_name = "NAME")]
    pub target: Option<String>,
    /// Rows to generate (kepler 8, pendulum 10).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Generator noise: relative for kepler (0.01), seconds for pendulum (0.005).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Generator seed (kepler 42, pendulum 7).
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "LIST", help = EPSILON_HELP)]
    pub epsilon: Option<String>,
    /// Template depth (root at depth 0).
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    /// Operators, comma separated, from + - * / ^ sqrt cbrt
    /// (default +,*,sqrt,cbrt; the pendulum preset adds -).
    #[arg(long, value_name = "LIST")]
    pub ops: Option<String>,
    /// Maximum occurrences of each operator.
    #[arg(long, default_value_t = 3)]
    pub op_cap: u32,
    /// Maximum constant leaves per model.
    #[arg(long, default_value_t = 2)]
    pub max_constants: usize,
    /// Constants are searched in [-C, C].
    #[arg(long, default_value_t = 100.0)]
    pub const_box: f64,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long, default_value_t = 21600.0)]
    pub time_limit: f64,
    /// Limit on explored search nodes per solve.
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Seed for constant-fitting start points.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Quantity to minimize.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::NodeCount)]
    pub objective: ObjectiveArg,
    /// Box splits allowed when certifying that a structure cannot fit.
    #[arg(long, default_value_t = 100_000)]
    pub cert_budget: usize,
    /// Worker threads for constant fitting.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Write the JSON report to PATH (`-` for standard output).
    #[arg(long, value_name = "PATH")]
    pub json: Option<PathBuf>,
    /// Disable interval pruning.
    #[arg(long)]
    pub no_prune: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub gen: Preset,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Output file (standard output when absent).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
