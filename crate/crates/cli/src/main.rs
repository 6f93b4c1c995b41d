mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netblock::error::ErrorClass;

/// Low-rank connectivity estimation for samples of blockmodel graphs.
#[derive(Debug, Parser)]
#[command(name = "netblock", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one sample from an experiment config and write it to disk.
    Simulate(SimulateArgs),
    /// Estimate one connectivity matrix from an ingested sample.
    Estimate(EstimateArgs),
    /// Two-stage multilayer estimation with layer grouping.
    Multi(MultiArgs),
    /// Report the cross-validation path and losses.
    Cv(CvArgs),
    /// Run a Monte-Carlo experiment from a config file or preset.
    Bench(BenchArgs),
    /// Singular values for choosing the number of layer groups or the rank.
    Scree(ScreeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Clustering {
    Gmm,
    Kmeans,
    BiasAdjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Gmm,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScreeSource {
    /// Rows are upper triangles of each layer's adjacency.
    PerLayerA,
    /// Rows are upper triangles of each layer's averaging estimate.
    PerLayerB,
    /// Singular values of the averaging estimate of the whole sample.
    Averaging,
}

#[derive(Debug, Args)]
pub struct ConfigSource {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Named preset: rank1, rank1-est-z, reestimate, multi, trunc-dense, trunc-sparse.
    #[arg(long)]
    pub preset: Option<String>,
    /// Use the full-size version of the preset.
    #[arg(long, requires = "preset")]
    pub full_scale: bool,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Output directory for layers, manifest, labels and true matrices.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Sample manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Number of communities.
    #[arg(long)]
    pub k: usize,
    /// Override the manifest's sparsity factor.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Drop self-loops after loading.
    #[arg(long)]
    pub no_self_loops: bool,
    /// Seed for clustering and fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the JSON report and CSV matrices; the report goes to
    /// stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MembershipArgs {
    /// Known memberships (labels file); skips clustering.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Clustering::Gmm)]
    pub clustering: Clustering,
    /// Spectral embedding dimension (defaults to K).
    #[arg(long)]
    pub embed_dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CvOptions {
    /// Number of folds for M-fold cross-validation.
    #[arg(long, default_value_t = netblock::tuning::DEFAULT_FOLDS)]
    pub folds: usize,
    /// Use repeated splits with this many training layers instead of folds.
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long, default_value_t = netblock::tuning::DEFAULT_GRID_COUNT)]
    pub grid_count: usize,
    /// Smallest grid value as a fraction of lambda_max.
    #[arg(long, default_value_t = netblock::tuning::DEFAULT_FLOOR_RATIO)]
    pub floor_ratio: f64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub membership: MembershipArgs,
    /// Fixed tuning parameter.
    #[arg(long, conflicts_with = "cv")]
    pub lambda: Option<f64>,
    /// Choose lambda by cross-validation (the default).
    #[arg(long)]
    pub cv: bool,
    #[command(flatten)]
    pub cv_options: CvOptions,
}

#[derive(Debug, Args)]
pub struct MultiArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    /// Number of layer groups; chosen by the scree rule when absent.
    #[arg(long)]
    pub l_tilde: Option<usize>,
    /// Fixed tuning parameter for every group.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = EngineArg::Gmm)]
    pub layer_engine: EngineArg,
    #[command(flatten)]
    pub cv_options: CvOptions,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub membership: MembershipArgs,
    #[command(flatten)]
    pub cv_options: CvOptions,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: ConfigSource,
    /// Override the number of replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Run the spectral truncation sweep over these ranks instead
    /// (comma-separated; `all` for 1..=n).
    #[arg(long)]
    pub sweep: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScreeArgs {
    #[command(flatten)]
    pub sample: SampleArgs,
    #[arg(long, value_enum, default_value_t = ScreeSource::PerLayerB)]
    pub source: ScreeSource,
    /// Known memberships; bias-adjusted clustering is used otherwise.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Largest number of groups the elbow rule may return.
    #[arg(long, default_value_t = 10)]
    pub max_groups: usize,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numerical => 3,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("NETBLOCK_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("NETBLOCK_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
