//! `qmimo` experiment driver.
//!
//! Exit status: 0 on success, 2 on configuration or usage errors, 3 on
//! numeric failures.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{pick, ExperimentConfig};

#[derive(Parser)]
#[command(name = "qmimo", version, about = "Rates, region counts and simulations for MIMO receivers with one-bit ADCs")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record wall-clock times (otherwise reported as 0).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Achievable rates over scenarios and power levels.
    Rates(RatesArgs),
    /// High-SNR sweeps of region codes.
    Highsnr(HighsnrArgs),
    /// Region-count adjudication on the lifted paraboloid.
    Counts(CountsArgs),
    /// Monte Carlo run of a single code.
    Simulate(SimulateArgs),
    /// Distance-sign indexing and Bernstein approximation demo.
    Approx(ApproxArgs),
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// Channel file.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Diagonal gains, as an alternative to a channel file.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gains: Option<Vec<f64>>,
    /// Scenarios (I, II, V, III) or families (linear, quadratic-v, all-quadratic, arbitrary).
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<String>>,
    #[arg(long)]
    nq: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    powers: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct HighsnrArgs {
    /// paraboloid, shattering, fig1a or fig1b.
    #[arg(long)]
    construction: Option<String>,
    /// Region code file, instead of a construction.
    #[arg(long)]
    code: Option<PathBuf>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    nq: Option<usize>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    powers: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CountsArgs {
    #[arg(long)]
    rank_max: Option<usize>,
    #[arg(long)]
    nq_min: Option<usize>,
    #[arg(long)]
    nq_max: Option<usize>,
    /// Surface samples per entry.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Figure 1 scheme, a or b.
    #[arg(long)]
    fig1: Option<String>,
    #[arg(long)]
    code: Option<PathBuf>,
    /// Power budget; the Figure 1 schemes are scaled by its square root.
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ApproxArgs {
    #[arg(long)]
    partitions: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    degrees: Option<Vec<usize>>,
    #[arg(long)]
    half_width: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(qmimo::Error),
}

impl From<qmimo::Error> for CliError {
    fn from(e: qmimo::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use qmimo::Error::*;
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(
                BoundaryAmbiguity { .. } | Degenerate(_) | ConstructionFailure(_) | Singular(_) | InfeasiblePower(_)
                | Numeric(_),
            ) => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.common.clone();
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let name = match &cli.command {
        Command::Rates(_) => "rates",
        Command::Highsnr(_) => "highsnr",
        Command::Counts(_) => "counts",
        Command::Simulate(_) => "simulate",
        Command::Approx(_) => "approx",
    };
    cfg.check_command(name)?;
    if let Some(jobs) = common.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let out = match (common.out, &cfg.out) {
        (Some(o), _) => o,
        (None, Some(o)) => cfg.resolve(o),
        (None, None) => PathBuf::from("out"),
    };
    let ctx = commands::Ctx {
        out,
        seed: pick(common.seed, cfg.seed, 0),
        timing: common.timing || cfg.timing.unwrap_or(false),
    };
    match &cli.command {
        Command::Rates(a) => commands::rates(a, &cfg, &ctx),
        Command::Highsnr(a) => commands::highsnr(a, &cfg, &ctx),
        Command::Counts(a) => commands::counts(a, &cfg, &ctx),
        Command::Simulate(a) => commands::simulate(a, &cfg, &ctx),
        Command::Approx(a) => commands::approx(a, &cfg, &ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmimo: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
