mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Environment variable that sets the worker-thread count.
const THREADS_ENV: &str = "TRILINEAR_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "trilinear",
    version,
    about = "CP and Tucker tensor decompositions, uniqueness checks and Cramér-Rao bounds"
)]
struct Cli {
    /// Write the JSON run report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a canonical polyadic decomposition.
    Decompose(DecomposeArgs),
    /// Fit a Tucker model by higher-order orthogonal iteration.
    Tucker(TuckerArgs),
    /// Run uniqueness checks on a model, a tensor, or a size and rank.
    Check(CheckArgs),
    /// Cramér-Rao bound for a CP model under additive noise.
    Crb(CrbArgs),
    /// Generate a tensor from a fixture or a random planted model.
    Synth(SynthArgs),
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Random,
    Gevd,
}

#[derive(Args, Debug, Serialize)]
pub struct DecomposeArgs {
    /// Tensor file, or `fixture:<name>`.
    pub tensor: String,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    /// Constraint for one mode, repeated once per mode in order, or given
    /// once to apply to every mode. Kinds: none, nonneg, simplex, monotone,
    /// l1:<λ>, smooth:<λ>, sparse:<s>, symmetric:<mode>.
    #[arg(long = "constraint")]
    pub constraints: Vec<String>,
    /// Tensor file of the same shape; nonzero entries mark observed data.
    #[arg(long)]
    pub missing_mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct TuckerArgs {
    pub tensor: String,
    /// Multilinear ranks, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ranks: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Include the core tensor and bases in the report.
    #[arg(long)]
    pub full: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    /// Mode sizes, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["model", "tensor"])]
    pub dims: Vec<usize>,
    #[arg(long, requires = "dims")]
    pub rank: Option<usize>,
    /// Decide generic uniqueness for the size and rank instead of testing a
    /// random instance.
    #[arg(long, requires = "rank")]
    pub generic: bool,
    /// Model JSON: a `decompose` report or a bare model document.
    #[arg(long, conflicts_with = "tensor")]
    pub model: Option<PathBuf>,
    /// Tensor whose multilinear ranks bound its rank.
    #[arg(long)]
    pub tensor: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    Gaussian,
    Laplacian,
    Cauchy,
}

#[derive(Args, Debug, Serialize)]
pub struct CrbArgs {
    /// Model JSON: a `decompose` report or a bare model document.
    #[arg(long, conflicts_with = "dims")]
    pub model: Option<PathBuf>,
    /// Draw a random unit-norm model of this size instead.
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    pub noise: NoiseArg,
    /// Noise scale: σ for Gaussian, b for Laplacian, γ for Cauchy.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageArg {
    Dense,
    Coo,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingArg {
    Text,
    Binary,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Named fixture: complexmult, strassen or border-rank.
    #[arg(long, conflicts_with_all = ["dims", "rank"])]
    pub fixture: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, conflicts_with = "snr_db")]
    pub sigma: Option<f64>,
    /// Signal-to-noise ratio in decibels; sets the noise level.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Write the tensor to this file.
    #[arg(long)]
    pub write: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = StorageArg::Dense)]
    pub storage: StorageArg,
    #[arg(long, value_enum, default_value_t = EncodingArg::Text)]
    pub encoding: EncodingArg,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Fraction of random N×N×2 Gaussian tensors with real-rank N.
    TypicalRank(TypicalRankArgs),
    /// Empirical ALS mean-square error against the Cramér-Rao bound.
    MseVsCrb(MseVsCrbArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct TypicalRankArgs {
    #[arg(long, default_value_t = 2)]
    pub size: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct MseVsCrbArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [10, 10, 10])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    #[arg(long, default_value_t = 20.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn configure_threads() -> Result<(), commands::Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| commands::Failure::Usage(format!("{THREADS_ENV} must be a thread count, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::Usage(format!("{THREADS_ENV}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Decompose(a) => commands::decompose(a),
        Command::Tucker(a) => commands::tucker(a),
        Command::Check(a) => commands::check(a),
        Command::Crb(a) => commands::crb(a),
        Command::Synth(a) => commands::synth(a),
        Command::Bench(BenchCommand::TypicalRank(a)) => commands::typical_rank(a),
        Command::Bench(BenchCommand::MseVsCrb(a)) => commands::mse_vs_crb(a),
    });
    match outcome {
        Ok(report) => match report.emit(cli.out.as_deref()) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: cannot write report: {e}");
                ExitCode::from(2)
            }
        },
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
