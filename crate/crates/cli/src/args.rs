use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "dbd",
    version,
    about = "Distributionally balanced circular sampling designs"
)]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a circular ordering and write it as a sequence file.
    Optimize(OptimizeArgs),
    /// Draw samples from a sequence file.
    Sample(SampleArgs),
    /// Monte Carlo evaluation of designs on a population file.
    Eval(EvalArgs),
    /// Compare DBD, LPM and SRS on a synthetic or file population.
    Bench(BenchArgs),
}

/// Population input shared by the data-driven commands.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Delimited text file with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Field delimiter: a single character, or `tab`.
    #[arg(long, default_value = ",")]
    pub delimiter: String,

    /// Comma-separated auxiliary columns.
    #[arg(long, value_delimiter = ',')]
    pub aux: Vec<String>,

    /// Comma-separated study variables.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,

    /// Integer stratum column.
    #[arg(long)]
    pub strata: Option<String>,

    /// Unit id column; data row numbers are used when omitted.
    #[arg(long)]
    pub id: Option<String>,

    /// Use the auxiliaries as given instead of z-scores.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Sample size, or `label:n,...` per stratum.
    #[arg(long)]
    pub n: String,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,

    #[arg(long, default_value_t = 1_000_000)]
    pub iters: u64,

    /// Initial temperature, or `auto`.
    #[arg(long, default_value = "auto")]
    pub t0: String,

    /// Cooling rate in (0, 1), or `auto`.
    #[arg(long, default_value = "auto")]
    pub alpha: String,

    /// Independent chains run in parallel; the best is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,

    #[arg(long, default_value_t = 10_000)]
    pub report_every: u64,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub sequence: PathBuf,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Number of independent draws.
    #[arg(long, default_value_t = 1)]
    pub count: usize,

    /// List all N windows in start order instead of drawing.
    #[arg(long)]
    pub enumerate: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Comma-separated designs among dbd, lpm and srs.
    #[arg(long, value_delimiter = ',', default_value = "dbd,lpm,srs")]
    pub designs: Vec<String>,

    /// Replicates per stochastic design; DBD is always enumerated.
    #[arg(long, default_value_t = 1_000)]
    pub reps: usize,

    /// Neighbourhood size of the local mean variance estimator.
    #[arg(long, default_value_t = 2)]
    pub k: usize,

    /// Sequence file, required for dbd.
    #[arg(long)]
    pub sequence: Option<PathBuf>,

    /// Sample size for lpm and srs; defaults to the sequence block size.
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Synthetic uniform population `N,p`, used instead of --input.
    #[arg(long)]
    pub synthetic: Option<String>,

    #[arg(long)]
    pub n: usize,

    #[arg(long, default_value_t = 1_000_000)]
    pub iters: u64,

    #[arg(long, default_value_t = 1_000)]
    pub reps: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
