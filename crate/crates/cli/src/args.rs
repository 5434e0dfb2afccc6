use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

const FORMATS: &str = "\
Input formats (UTF-8 text, blank lines ignored):
  points    first line 'd n', then n lines of d decimals
  weighted  first line 'd n', then n lines of d coordinates and a weight
  gram      first line 'n', then n lines of n similarities in [0,1], unit diagonal
  grid      ASCII PGM (P2), or first line 'd' then d lines of d intensities >= 0
  joint     first line 'n m', then n lines of m nonnegative entries
  vector    whitespace-separated decimals (weights are normalized when they
            sum to 1 within 1e-6)
Outputs use 12 significant digits. Traces are CSV with header 'step,objective'
(solvers) or 'scale,value,smoothed_d2' (sweeps).
Exit codes: 0 success, 1 invalid input or flags, 2 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "gait", version, about = "Geometry-aware entropy, divergence and solvers", after_help = FORMATS)]
pub struct Cli {
    /// Worker threads (GAIT_THREADS overrides this).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(1..))]
    pub threads: usize,

    /// Write a JSON run manifest here (defaults to <out>.manifest.json when --out is set).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy and diversity of a distribution on a similarity space.
    Entropy(EntropyArgs),
    /// Divergence between two weighted point sets.
    Divergence(DivergenceArgs),
    /// Maximum-entropy distribution on a similarity space.
    Maxent(MaxentArgs),
    /// Barycenter of a directory of grid images.
    Barycenter(BarycenterArgs),
    /// Approximate a point set by a smaller or reweighted measure.
    Approx(ApproxArgs),
    /// Count modes by diversity or collision sweeps.
    Modes(ModesArgs),
    /// Entropies and mutual information of a joint table.
    Mi(MiArgs),
    /// Randomized checks of the concavity conjecture.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    RbfSq,
    ExpMetric,
    Polynomial,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value = "rbf-sq")]
    pub kernel: Family,
    /// Bandwidth for rbf-sq and exp-metric.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Norm order for exp-metric.
    #[arg(long, default_value_t = 2.0)]
    pub order: f64,
    /// Exponent for polynomial.
    #[arg(long, default_value_t = 1.5)]
    pub exponent: f64,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Use the running maximum of the second moment.
    #[arg(long)]
    pub amsgrad: bool,
    /// Softmax temperature for simplex parameters.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Per-step CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[arg(long)]
    pub gram: PathBuf,
    #[arg(long)]
    pub dist: PathBuf,
    /// Order: a nonnegative number or 'inf'.
    #[arg(long, default_value = "1")]
    pub alpha: String,
}

#[derive(Debug, Args)]
pub struct DivergenceArgs {
    /// Support of the first measure (points).
    #[arg(long)]
    pub x: PathBuf,
    /// Support of the second measure (points).
    #[arg(long)]
    pub y: PathBuf,
    /// Weights on x (uniform if omitted).
    #[arg(long)]
    pub px: Option<PathBuf>,
    /// Weights on y (uniform if omitted).
    #[arg(long)]
    pub qy: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Also print the reverse direction.
    #[arg(long)]
    pub both: bool,
}

#[derive(Debug, Args)]
pub struct MaxentArgs {
    #[arg(long)]
    pub gram: PathBuf,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Write the distribution here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BarycenterArgs {
    /// Directory of grid files, read in name order.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = 0.04)]
    pub sigma: f64,
    #[arg(long)]
    pub batch: Option<usize>,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Output PGM.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Locations,
    Weights,
    Both,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    /// Target support (points).
    #[arg(long)]
    pub target: PathBuf,
    /// Target weights (uniform if omitted).
    #[arg(long)]
    pub target_weights: Option<PathBuf>,
    /// Starting measure (weighted points). Defaults to m atoms drawn from
    /// the target, or the target support itself in weights mode.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Number of atoms when no --init is given.
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    #[arg(long, value_enum, default_value = "locations")]
    pub mode: Mode,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Minibatch size drawn from the target each step.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Enable the sparsity penalty (weights or both mode).
    #[arg(long)]
    pub sparse: bool,
    #[arg(long, default_value_t = 0.01)]
    pub penalty_weight: f64,
    #[arg(long, default_value_t = 0.75)]
    pub penalty_exponent: f64,
    #[arg(long, default_value_t = 0.01)]
    pub prune: f64,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Output weighted points.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Diversity,
    Birthday,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[arg(long)]
    pub points: PathBuf,
    /// Sample weights (uniform if omitted; diversity only).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "diversity")]
    pub method: Method,
    #[arg(long, default_value_t = 0.1)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 25.0)]
    pub scale_max: f64,
    #[arg(long, default_value_t = 100)]
    pub scale_count: usize,
    /// Multiply the scale grid by the sample diameter.
    #[arg(long)]
    pub relative: bool,
    /// Norm order of the collision distance.
    #[arg(long, default_value_t = 2.0)]
    pub order: f64,
    #[arg(long, default_value_t = 11)]
    pub window: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MiArgs {
    #[arg(long)]
    pub joint: PathBuf,
    /// Gram on the rows (identity if omitted).
    #[arg(long)]
    pub gramx: Option<PathBuf>,
    /// Gram on the columns (identity if omitted).
    #[arg(long)]
    pub gramy: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Divergence,
    Hessian,
    Segment,
    Lines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Inject {
    None,
    EqualDistributions,
    IdentityGram,
    AllOnesGram,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub check: Check,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    #[arg(long, default_value_t = 11)]
    pub max_size: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub inject: Inject,
    /// Offsets for the parallel-lines check.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,1,2")]
    pub phis: Vec<f64>,
    /// Discretization for the parallel-lines check.
    #[arg(long, default_value_t = 2000)]
    pub lines_n: usize,
    /// Append counterexample records (JSON lines) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
