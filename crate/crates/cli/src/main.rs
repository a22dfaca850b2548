mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use chanspec::ErrorClass;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chanspec", version, about = "Quantum channel spectra from sequential weak measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check CPTP, conjugate pairing, metric and swap-time residuals.
    Verify(VerifyArgs),
    /// Sample measurement trajectories and write the outcome frequencies.
    Simulate(SimulateArgs),
    /// Extract poles and amplitudes from a signal CSV with the matrix pencil.
    Spectrum(SpectrumArgs),
    /// Match spectrum phases to a parameter pattern.
    Estimate(EstimateArgs),
    /// Scan the single-spin model over (mu, nu) around its exceptional line.
    EpScan(EpScanArgs),
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, conflicts_with = "kraus", required_unless_present = "kraus")]
    pub config: Option<PathBuf>,
    /// Kraus operators as JSON {dim, operators: [[[re, im], ...], ...]}.
    #[arg(long)]
    pub kraus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub cycles: Option<u32>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub plot: bool,
    /// Add the exact outcome probability column.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Signal CSV with header m,f_1[,p_1].
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long)]
    pub column: Option<String>,
    /// Supplies pencil defaults and the ideal eigenvalues for the plot.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub pencil: Option<usize>,
    /// Fixed model order.
    #[arg(long, conflicts_with_all = ["threshold", "noise_factor"])]
    pub order: Option<usize>,
    /// Singular-value ratio threshold.
    #[arg(long, conflicts_with = "noise_factor")]
    pub threshold: Option<f64>,
    /// Noise-floor rule: multiple of the expected noise singular value.
    #[arg(long)]
    pub noise_factor: Option<f64>,
    /// Trajectory count behind the signal, for the noise-floor rule.
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub refine: bool,
    #[arg(long)]
    pub max_modulus: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Spectrum JSON as written by `spectrum`.
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub pattern: Option<String>,
    /// Free-evolution time in seconds.
    #[arg(long)]
    pub tau_b: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EpScanArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// start:stop:count in radians.
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub nu: Option<String>,
    /// Fit the three EP signal models at every grid point.
    #[arg(long)]
    pub classify: bool,
    /// Signal length for --classify.
    #[arg(long)]
    pub cycles: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => commands::verify(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Estimate(a) => commands::estimate(&a),
        Command::EpScan(a) => commands::ep_scan(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Numerical => 2,
                ErrorClass::Io => 3,
            })
        }
    }
}
