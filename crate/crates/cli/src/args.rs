use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Edge statistics of sample covariance matrices for elliptical data.
#[derive(Debug, Parser)]
#[command(name = "twedge", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the edge quantities c, lambda_plus, gamma and the condition margin.
    Edge(EdgeArgs),
    /// Emit the largest eigenvalue of each replicate and its rescaled value.
    Simulate(SimulateArgs),
    /// Empirical CDF of the rescaled largest eigenvalue at the TW1 table percentiles.
    Table1(Table1Args),
    /// Null rejection rate of the Onatski test.
    TestSize(TestSizeArgs),
    /// Rejection rate of the Onatski test under the signal-plus-noise alternative.
    TestPower(TestPowerArgs),
    /// GOE percentiles of d^{2/3}(lambda_1 - 2).
    CalibrateTw(CalibrateArgs),
    /// GOE percentiles of the Onatski ratio.
    CalibrateOnatski(CalibrateOnatskiArgs),
    /// Distance between the empirical and limiting Stieltjes transforms near the edge.
    Locallaw(LocalLawArgs),
    /// Fluctuation size of lambda_1 around lambda_plus over a ladder of sizes.
    Rigidity(RigidityArgs),
    /// Kolmogorov-Smirnov distance between rescaled lambda_1 of two radius laws.
    Universality(UniversalityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Profile {
    /// Minutes: 2000 replicates, GOE dimension 500 with 10^4 draws.
    #[default]
    Desk,
    /// Hours: 10^4 replicates, GOE dimension 3000 with 30000 draws.
    Heavy,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Builtin population spectrum: identity, sigma1 or sigma2.
    #[arg(long, conflicts_with = "spectrum_file")]
    pub builtin: Option<String>,
    /// Population spectrum file with one `value weight` pair per line.
    #[arg(long)]
    pub spectrum_file: Option<PathBuf>,
    /// Key-value model file (spectrum, phi, M, N, radius, seed, reps, workers, alpha); flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Aspect ratio M/N.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Dimension M.
    #[arg(long = "M", value_name = "M")]
    pub m: Option<usize>,
    /// Sample size N.
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,
    /// Radius law: chi, pearson, gamma, d1, d2 or atoms:a:w,a:w,...
    #[arg(long)]
    pub radius: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Monte-Carlo replicates (default depends on --profile).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed; required for every random computation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub profile: Profile,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Print a JSON document instead of text or CSV.
    #[arg(long)]
    pub json: bool,
    /// Also write the result files into this directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CacheArgs {
    /// Calibration cache directory.
    #[arg(long, env = "TWEDGE_CACHE")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrationArgs {
    /// GOE dimension (default depends on --profile).
    #[arg(long)]
    pub calib_dim: Option<usize>,
    /// GOE replicates (default depends on --profile).
    #[arg(long)]
    pub calib_reps: Option<usize>,
    /// Seed of the calibration run (defaults to --seed).
    #[arg(long)]
    pub calib_seed: Option<u64>,
    /// Use dense GOE matrices instead of the tridiagonal model.
    #[arg(long)]
    pub dense: bool,
}

#[derive(Debug, Args)]
pub struct EdgeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Rescale with the edge from this JSON file (as printed by `edge --json`).
    #[arg(long)]
    pub edge_from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TestSizeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    /// Nominal level.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TestPowerArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    /// Nominal level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Signal strengths.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 4.0, 6.0])]
    pub nu: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// GOE dimension (default depends on --profile).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Use dense GOE matrices instead of the tridiagonal model.
    #[arg(long)]
    pub dense: bool,
    /// Probabilities to estimate (default: the TW1 table probabilities).
    #[arg(long, value_delimiter = ',')]
    pub probs: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateOnatskiArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// GOE dimension (default depends on --profile).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Use dense GOE matrices instead of the tridiagonal model.
    #[arg(long)]
    pub dense: bool,
    /// Level whose critical value is stored in addition to the defaults.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct LocalLawArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Imaginary parts of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.025])]
    pub eta: Vec<f64>,
    /// Real parts of the grid, as offsets from lambda_plus.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0])]
    pub energy_offset: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct RigidityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Sample sizes N; M = round(phi N).
    #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 400])]
    pub ladder: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct UniversalityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Radius law of the second sample.
    #[arg(long)]
    pub radius_b: String,
    /// Seed of the second sample (defaults to --seed + 1).
    #[arg(long)]
    pub seed_b: Option<u64>,
}
