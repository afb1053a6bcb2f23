use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "nonlocal-optim",
    version,
    about = "Discrete adaptive optimizers and their continuous-time nonlocal models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the discrete optimizer.
    Discrete(ExperimentArgs),
    /// Solve the continuous model.
    Continuous(ExperimentArgs),
    /// Run both and report their discrepancy.
    Compare(ExperimentArgs),
    /// Regenerate the runs and overlay charts of figure N (1-14).
    ReproduceFigure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=14))]
        figure: u8,
        /// Output directory.
        #[arg(long, value_name = "DIR", default_value = "figures")]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the fast invariant checks.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Quadratic,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CouplingArg {
    Causal,
    Frozen,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverArgs {
    /// Global error tolerance of the fixed-point iteration.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Gauss-Legendre nodes for memory quadrature.
    #[arg(long, value_name = "N")]
    pub quad_nodes: Option<usize>,
    /// Cap on outer iterations.
    #[arg(long, value_name = "N")]
    pub max_outer: Option<usize>,
    /// Incremental memory recurrence (on) or full quadrature per node (off).
    #[arg(long, value_enum)]
    pub fast_memory: Option<Switch>,
    /// Trajectory the memory integrals are evaluated on.
    #[arg(long, value_enum)]
    pub coupling: Option<CouplingArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// JSON file with default values; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// gd, adagrad, rmsprop, adam, adamw or adaml2.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Minimizer of the quadratic objective.
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<f64>,
    /// Sample inputs of the MSE objective, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mse_inputs: Option<Vec<f64>>,
    /// Target slope of the MSE objective.
    #[arg(long, allow_hyphen_values = true)]
    pub mse_slope: Option<f64>,
    /// Learning rate; also the time step of the continuous grid.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// RMSProp decay.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Adam first-moment decay.
    #[arg(long)]
    pub beta1: Option<f64>,
    /// Adam second-moment decay.
    #[arg(long)]
    pub beta2: Option<f64>,
    /// Decoupled weight decay (adamw).
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// L2 penalty (adaml2).
    #[arg(long)]
    pub l2_lambda: Option<f64>,
    /// Starting point, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta0: Option<Vec<f64>>,
    /// Horizon in iterations.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Record every N-th iteration.
    #[arg(long, value_name = "N")]
    pub stride: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for CSV files.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write an SVG chart.
    #[arg(long)]
    pub svg: bool,
}
