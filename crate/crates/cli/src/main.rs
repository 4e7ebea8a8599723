//! `hfhr`: samplers, reflection couplings, certified contraction constants
//! and transport distances from the command line.

mod commands;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use model::ModelArgs;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "HFHR_OUTPUT_DIR";
const FALLBACK_OUTPUT: &str = "hfhr-out";

#[derive(Debug, Parser)]
#[command(name = "hfhr", version, about = "HFHR and kinetic Langevin sampling laboratory")]
struct Cli {
    /// Progress messages on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an ensemble of chains and write their snapshots.
    Sample(SampleArgs),
    /// Run coupled pairs and compare the fitted contraction rate with c(λ).
    Couple(CoupleArgs),
    /// Print the certified constant ledger of a case study.
    Constants(ConstantsArgs),
    /// Empirical W₂ between two point clouds stored as CSV.
    Wasserstein(WassersteinArgs),
    /// Run an experiment described by a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory [default: $HFHR_OUTPUT_DIR, else ./hfhr-out].
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl OutputArgs {
    /// Flag, then `fallback`, then the environment, then `./hfhr-out`.
    pub fn resolve(&self, fallback: Option<&PathBuf>) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| fallback.cloned())
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Hfhr,
    Klmc,
    Ula,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "hfhr")]
    pub sampler: SamplerArg,
    /// Resolution α (HFHR only).
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 100)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log-spaced snapshots besides step 0.
    #[arg(long, default_value_t = 10)]
    pub snapshots: usize,
    /// Start from N(0, σ²) entries instead of the origin.
    #[arg(long)]
    pub init_std: Option<f64>,
    /// Also write momenta.
    #[arg(long)]
    pub with_momenta: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StartArg {
    /// Both copies drawn independently with N(0, s²) entries.
    Independent,
    /// Origin against `q = s·e₁`, zero momenta.
    Offset,
    /// Both copies at the origin.
    Identical,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eta: f64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub snapshots: usize,
    /// Share κ of the metric contraction kept in reserve.
    #[arg(long, default_value_t = 0.5)]
    pub kappa_adjust: f64,
    /// Reflection cutoff ξ [default: 1e-4·R₁].
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long, value_enum, default_value = "independent")]
    pub start: StartArg,
    /// Spread s of the starting pairs.
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Also run α = 0 and print both rates.
    #[arg(long)]
    pub compare: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub kappa_adjust: f64,
    /// Also locate λ★(γ) (multi-well only).
    #[arg(long)]
    pub lambda_scan: bool,
    /// Radial and angular resolution of the drift certificates.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the JSON ledger here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Exact 1D for d = 1, assignment when sizes match and are small, else sliced.
    Auto,
    Exact1d,
    Assignment,
    Sliced,
}

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    /// First cloud: numeric CSV with a header, one point per row.
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    #[arg(long, default_value_t = 128)]
    pub projections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leading columns to drop from both files.
    #[arg(long, default_value_t = 0)]
    pub skip_columns: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hfhr::Error),
    #[error("certificate failed: {0}")]
    Certificate(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use hfhr::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Certificate(_) => 3,
            Self::Core(E::Certificate(_)) => 3,
            Self::Core(E::Divergence { .. } | E::Numerical(_) | E::Singular(_) | E::NotSymmetric(_)) => 4,
            Self::Core(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = cli.verbose;
    let outcome = match cli.command {
        Command::Sample(a) => commands::sample(&a, verbose),
        Command::Couple(a) => commands::couple(&a, verbose),
        Command::Constants(a) => commands::constants(&a),
        Command::Wasserstein(a) => commands::wasserstein(&a),
        Command::Experiment(a) => commands::experiment(&a, verbose),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
