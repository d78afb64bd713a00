//! `oqmetro` command-line front-end.
//!
//! Every subcommand writes data only (CSV or JSON) to stdout or `--out`.
//! Exit codes: 0 success, 2 configuration error, 3 statistical failure.

mod commands;
mod output;
mod values;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oqmetro::Target;

#[derive(Debug, Parser)]
#[command(name = "oqmetro", version, about = "Operational quasiprobability metrology simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// OQ and quantum Fisher information against measurement sharpness.
    FiSweep(FiSweepArgs),
    /// Advantage log10(I_OQ / 2 I_Q) over a (theta, phi) grid.
    AdvantageMap(AdvantageMapArgs),
    /// Monte-Carlo MLE and LEP runs at each point of a parameter segment.
    Estimate(EstimateArgs),
    /// Compatibility verdicts for a pair of two-outcome qubit measurements.
    Compat(CompatArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Theta,
    Phi,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Theta => Target::Polar,
            TargetArg::Phi => Target::Azimuthal,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Estimated angle.
    #[arg(long, value_enum, default_value = "theta")]
    pub target: TargetArg,
    /// Sharpness: a value, a comma list, or start:stop:step.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Polar angle(s); accepts `pi`, e.g. `pi/2` or `0:pi:pi/100`.
    #[arg(long)]
    pub theta: Option<String>,
    /// Azimuthal angle(s).
    #[arg(long)]
    pub phi: Option<String>,
    /// Observations per measurement setting.
    #[arg(long, default_value_t = 100_000)]
    pub n: u64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
    /// Output format; `compat` defaults to json, the rest to csv.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct FiSweepArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AdvantageMapArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Search interval lo:hi for the estimated angle.
    #[arg(long)]
    pub domain: Option<String>,
    /// Use exact expected counts instead of Monte-Carlo draws.
    #[arg(long)]
    pub expected: bool,
    #[command(flatten)]
    pub measurement: MeasurementArgs,
}

#[derive(Debug, Args)]
pub struct CompatArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub measurement: MeasurementArgs,
}

/// Custom measurement pair, replacing the mutually unbiased one.
#[derive(Debug, Args)]
pub struct MeasurementArgs {
    /// Bloch vector of the first measurement, `x,y,z`.
    #[arg(long, requires = "nu")]
    pub mu: Option<String>,
    /// Bloch vector of the second measurement.
    #[arg(long, requires = "mu")]
    pub nu: Option<String>,
    /// JSON file holding the first POVM.
    #[arg(long, requires = "povm_b", conflicts_with = "mu")]
    pub povm_a: Option<std::path::PathBuf>,
    /// JSON file holding the second POVM.
    #[arg(long, requires = "povm_a", conflicts_with = "nu")]
    pub povm_b: Option<std::path::PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Statistical(String),
}

impl From<oqmetro::Error> for CliError {
    fn from(e: oqmetro::Error) -> Self {
        match e {
            oqmetro::Error::AllTrialsOmitted => CliError::Statistical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("OQMETRO_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("OQMETRO_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::FiSweep(args) => commands::fi_sweep(&args),
        Command::AdvantageMap(args) => commands::advantage_map(&args),
        Command::Estimate(args) => commands::estimate(&args),
        Command::Compat(args) => commands::compat(&args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("oqmetro: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Statistical(msg)) => {
            eprintln!("oqmetro: {msg}");
            ExitCode::from(3)
        }
    }
}
