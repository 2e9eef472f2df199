//! `qreg`: learn sparse convolutional regularisers and reconstruct with them.
//!
//! Exit codes: 0 success, 1 certification failure, 2 usage error, 3 data error.

mod commands;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qreg_core::Extent;

#[derive(Parser)]
#[command(
    name = "qreg",
    version,
    about = "Learn sparse convolutional regularisers by quotient minimisation"
)]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic signal.
    Synth(Box<SynthArgs>),
    /// Learn a filter bank from an experiment config.
    Learn(LearnArgs),
    /// Run one experiment: learn (or load) the bank, then its reconstructions.
    Run(LearnArgs),
    /// Run every experiment config below a directory.
    RunAll(RunAllArgs),
    /// Constrained reconstruction of a signal with a filter bank.
    Reconstruct(ReconstructArgs),
    /// Evaluate the regulariser of a bank on a signal.
    Evaluate(EvaluateArgs),
    /// Re-check the descent certificates stored in a trajectory file.
    Verify { trajectory: PathBuf },
}

#[derive(Args)]
pub struct SynthArgs {
    /// step, piecewise_linear, staircase, ramp, stripes, rectangle, circle,
    /// diagonal_stripes or noise.
    #[arg(long)]
    pub kind: String,
    /// Length of a 1D signal.
    #[arg(long, alias = "length")]
    pub m: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub end: Option<String>,
    #[arg(long)]
    pub height: Option<String>,
    #[arg(long)]
    pub orientation: Option<String>,
    #[arg(long)]
    pub thickness: Option<String>,
    #[arg(long)]
    pub spacing: Option<String>,
    /// Degrees, for diagonal stripes.
    #[arg(long)]
    pub angle: Option<String>,
    #[arg(long)]
    pub radius: Option<String>,
    /// `row,col`
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long)]
    pub amplitude: Option<String>,
    /// Further generator fields as TOML, e.g. `breaks = [[30, -0.05]], slope = 0.05`.
    #[arg(long)]
    pub params: Option<String>,
    /// Noise level; for non-noise kinds, adds N(0, sigma²) noise.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the output extension.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Args)]
pub struct LearnArgs {
    pub config: PathBuf,
    /// Output directory; defaults to `results/<experiment name>`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Override the configured number of restarts.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Override the configured seed (takes precedence over QREG_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct RunAllArgs {
    #[arg(long, default_value = "experiments")]
    pub experiments: PathBuf,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Upper bound on restarts per experiment.
    #[arg(long, default_value_t = 32)]
    pub max_restarts: usize,
}

#[derive(Args)]
pub struct ReconstructArgs {
    /// Observed signal.
    pub input: PathBuf,
    pub bank: PathBuf,
    #[arg(long)]
    pub eta: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = ExtentArg::Valid)]
    pub extent: ExtentArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub gap_tol: f64,
}

#[derive(Args)]
pub struct EvaluateArgs {
    pub signal: PathBuf,
    pub bank: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ExtentArg {
    Full,
    Valid,
}

impl From<ExtentArg> for Extent {
    fn from(e: ExtentArg) -> Extent {
        match e {
            ExtentArg::Full => Extent::Full,
            ExtentArg::Valid => Extent::Valid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Csv,
    Pgm,
    F64,
}

impl From<FormatArg> for qreg_core::io::SignalFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Self::Csv,
            FormatArg::Pgm => Self::Pgm,
            FormatArg::F64 => Self::F64,
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Certification(String),
    Usage(String),
    Data(qreg_core::Error),
}

impl From<qreg_core::Error> for Failure {
    fn from(e: qreg_core::Error) -> Self {
        Failure::Data(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Certification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Certification(m) => write!(f, "certification failed: {m}"),
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Data(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Learn(a) => experiment::learn_command(&a),
        Command::Run(a) => experiment::run_command(&a),
        Command::RunAll(a) => experiment::run_all(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Verify { trajectory } => commands::verify(&trajectory),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qreg: {e}");
            ExitCode::from(e.code())
        }
    }
}
