use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "capbound", version, about = "Certified upper bounds on the capacity of 2-D constraints")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bound the capacity with one scheme.
    Solve(SolveArgs),
    /// Stripe (transfer matrix) baseline bound.
    Stripe(StripeArgs),
    /// Try a grid of schemes and keep the best bound.
    Search(SearchArgs),
    /// Enumerate admissible patches, filling the cache.
    Enumerate(EnumerateArgs),
    /// Check a scheme file and print its context sets.
    ValidateScheme(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Builtin name (free, nib, rll-d-k, rll-d-inf) or constraint file.
    #[arg(long)]
    pub constraint: String,
    #[arg(long = "r")]
    pub r: usize,
    #[arg(long = "s")]
    pub s: usize,
    /// Padding used to filter non-extensible patches.
    #[arg(long, default_value_t = 0)]
    pub delta: usize,
    /// Patch cache directory; CAPBOUND_CACHE is used when absent.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-7)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Barrier steps before the conditional-gradient phase.
    #[arg(long, default_value_t = 400)]
    pub refine_steps: usize,
    #[arg(long)]
    pub no_away_steps: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Scheme file (TOML).
    #[arg(long, conflicts_with = "simple", required_unless_present = "simple")]
    pub scheme: Option<PathBuf>,
    /// Single lex term anchored at (r-1, t), written t=<t>.
    #[arg(long)]
    pub simple: Option<String>,
    /// Also report the stripe bound at this width.
    #[arg(long)]
    pub stripe_width: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StripeArgs {
    #[arg(long)]
    pub constraint: String,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Include every simple scheme t = 0..s-1.
    #[arg(long)]
    pub sweep_t: bool,
    /// Terms mixed over the weight grid, e.g. "lex@2.2;skip[12]@2.4,2.4".
    #[arg(long)]
    pub terms: Option<String>,
    #[arg(long, default_value_t = 0.25)]
    pub rho_step: f64,
    /// Solve every candidate to completion instead of stopping losers early.
    #[arg(long)]
    pub no_prune: bool,
    /// Where to write the winning scheme.
    #[arg(long)]
    pub scheme_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scheme: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
