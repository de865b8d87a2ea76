//! Command-line surface: one subcommand per pipeline, flags mirroring the
//! library's configuration types.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multiness::EdgeFamily;

/// Latent space estimation for multiplex networks: decomposes layered
/// adjacency matrices into shared plus layer-individual low-rank structure.
#[derive(Debug, Parser)]
#[command(name = "multiness", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Cap on worker threads (fallback: the MULTINESS_THREADS variable).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multiplex network file
    Simulate(SimulateArgs),
    /// Estimate the common/individual decomposition of a network file
    Fit(FitArgs),
    /// Select the penalty level by edge cross-validation, then fit
    Crossval(CrossvalArgs),
    /// Extract latent position tables from a stored decomposition
    Embed(EmbedArgs),
    /// Impute the missing entries of one layer by eigenvalue thresholding
    Impute(ImputeArgs),
    /// Emit plotting-ready CSV tables for a stored fit
    Report(ReportArgs),
}

/// Edge distribution family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    /// Real-valued edges, identity link
    Gaussian,
    /// Binary edges, logistic link
    Bernoulli,
}

impl FamilyArg {
    pub fn family(self) -> EdgeFamily {
        match self {
            FamilyArg::Gaussian => EdgeFamily::gaussian(),
            FamilyArg::Bernoulli => EdgeFamily::BernoulliLogistic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyArg::Gaussian => "gaussian",
            FamilyArg::Bernoulli => "bernoulli",
        }
    }
}

/// `auto` (data-driven level) or an explicit nonnegative number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaArg {
    Auto,
    Value(f64),
}

impl FromStr for LambdaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LambdaArg::Auto);
        }
        s.parse::<f64>()
            .map(LambdaArg::Value)
            .map_err(|_| format!("'{s}' is neither 'auto' nor a number"))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of nodes
    #[arg(long)]
    pub n: usize,

    /// Number of layers
    #[arg(long)]
    pub m: usize,

    /// Common latent dimension
    #[arg(long)]
    pub d1: usize,

    /// Individual latent dimension (shared by every layer)
    #[arg(long)]
    pub d2: usize,

    /// Edge family
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,

    /// Noise standard deviation (gaussian family)
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,

    /// Logit intercept (bernoulli family)
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    /// Cross-layer noise correlation (gaussian family only)
    #[arg(long)]
    pub rho: Option<f64>,

    /// Generator seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output network file
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the true components (F.mat, G_k.mat) here
    #[arg(long)]
    pub truth_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input network file
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory for the decomposition and report
    #[arg(long)]
    pub out: PathBuf,

    /// Edge family
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,

    /// Penalty level, or `auto` for the noise-calibrated choice
    #[arg(long, default_value = "auto")]
    pub lambda: LambdaArg,

    /// Sharpness of the automatic penalty level
    #[arg(long, default_value_t = 0.309)]
    pub delta: f64,

    /// Weight layers by their own noise estimates in the automatic level
    #[arg(long)]
    pub layerwise: bool,

    /// Comma-separated per-layer penalty multipliers, overriding the
    /// automatic ones
    #[arg(long)]
    pub alphas: Option<String>,

    /// Base step size
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,

    /// Sweep limit
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,

    /// Relative objective-decrease threshold for convergence
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,

    /// Eigenpair budget per proximal step (performance knob)
    #[arg(long)]
    pub svd_budget: Option<usize>,

    /// Truncation rank of the layer-mean initializer
    #[arg(long)]
    pub d1_init: Option<usize>,

    /// Refit eigenvalues after the penalized stage to undo shrinkage
    #[arg(long)]
    pub refit: bool,

    /// Constrain every component to be positive semidefinite
    #[arg(long)]
    pub psd: bool,

    /// Apply log(1+w) to the weights at ingestion
    #[arg(long)]
    pub log1p: bool,

    /// Seed recorded in the report (fitting itself is deterministic)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Omit timing fields so repeated runs are byte-identical
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// Input network file
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory for the selection table, decomposition, and report
    #[arg(long)]
    pub out: PathBuf,

    /// Edge family
    #[arg(long, value_enum, default_value_t = FamilyArg::Gaussian)]
    pub family: FamilyArg,

    /// Comma-separated sharpness candidates for the automatic level
    #[arg(long, conflicts_with_all = ["lambdas", "constants"])]
    pub deltas: Option<String>,

    /// Comma-separated explicit penalty levels
    #[arg(long, conflicts_with_all = ["deltas", "constants"])]
    pub lambdas: Option<String>,

    /// Comma-separated constants C in λ = C·√(nm)
    #[arg(long, conflicts_with_all = ["deltas", "lambdas"])]
    pub constants: Option<String>,

    /// Weight layers by their own noise estimates (delta candidates)
    #[arg(long)]
    pub layerwise: bool,

    /// Fraction of observed off-diagonal pairs hidden per fold
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,

    /// Number of cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    /// Seed for the fold holdouts (also recorded in the report)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Refit eigenvalues in the final fit
    #[arg(long)]
    pub refit: bool,

    /// Constrain every component to be positive semidefinite
    #[arg(long)]
    pub psd: bool,

    /// Apply log(1+w) to the weights at ingestion
    #[arg(long)]
    pub log1p: bool,

    /// Omit timing fields so repeated runs are byte-identical
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Directory holding F.mat and G_1.mat…G_m.mat
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory for V.csv and U_k.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    /// Input network file (NA entries are the ones to impute)
    #[arg(long)]
    pub input: PathBuf,

    /// Layer to impute (1-based)
    #[arg(long)]
    pub layer: usize,

    /// Eigenvalue shrinkage level, or `auto` for the noise-calibrated one
    #[arg(long, default_value = "auto")]
    pub lambda: LambdaArg,

    /// Impute at this fixed rank instead of shrinking
    #[arg(long, conflicts_with = "lambda")]
    pub rank: Option<usize>,

    /// Apply log(1+w) to the weights at ingestion
    #[arg(long)]
    pub log1p: bool,

    /// Output matrix file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding a fit's report.json and matrices
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory for trace.csv, ranks.csv, spectra.csv
    #[arg(long)]
    pub out: PathBuf,
}
