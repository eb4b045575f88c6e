use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ssvcqr::{Bandwidth, SolverKind};
use ssvcqr::simulation::ErrorLaw;

#[derive(Debug, Parser)]
#[command(name = "ssvcqr", version, about = "Sparse-smooth spatially varying coefficient quantile regression")]
pub struct Cli {
    /// Worker threads for cross-validation and simulation.
    #[arg(long, global = true, env = "SSVCQR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the two-stage adaptive model and write the model JSON and a per-site CSV.
    Fit(FitArgs),
    /// Predict conditional quantiles at new locations from a saved model.
    Predict(PredictArgs),
    /// Run blocked cross-validation over the penalty grid.
    Cv(CvArgs),
    /// Monte Carlo study on the synthetic design.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Comma-separated columns with constant coefficients. An intercept is added unless
    /// --no-intercept is given.
    #[arg(long, value_delimiter = ',')]
    pub global_cols: Vec<String>,
    /// Comma-separated columns whose coefficients may vary over space.
    #[arg(long, value_delimiter = ',')]
    pub varying_cols: Vec<String>,
    /// The two coordinate columns, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
    pub coords: Vec<String>,
    #[arg(long)]
    pub no_intercept: bool,
    /// Keep the varying columns in their original units.
    #[arg(long)]
    pub no_standardize: bool,
    /// Keep coordinates as given instead of mapping them into the unit square.
    #[arg(long)]
    pub no_rescale: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Kernel bandwidth: "auto" or a positive number in model coordinates.
    #[arg(long, default_value = "auto", value_parser = parse_sigma)]
    pub sigma: Bandwidth,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Cross-validate even when both penalties are given.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "admm")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also refit at the selected penalties and write the fit outputs.
    #[arg(long)]
    pub fit: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value = "normal")]
    pub error_law: ErrorLaw,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threshold on the RMS of a fitted field for declaring it local.
    #[arg(long, default_value_t = 0.1)]
    pub kappa: f64,
    /// Write the per-site true/estimated field table of the first replicate.
    #[arg(long)]
    pub sites: bool,
    /// Write the first replicate's training data as CSV.
    #[arg(long)]
    pub write_data: bool,
    #[arg(long)]
    pub no_baseline: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_sigma(s: &str) -> Result<Bandwidth, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Bandwidth::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Bandwidth::Fixed(v)),
        _ => Err(format!("sigma must be 'auto' or a positive number, got '{s}'")),
    }
}
