mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "srbounds",
    version,
    about = "Moment-SDP bounds and numerical baselines for the periodically forced double well"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Two-sided bounds on stationary time-averaged moments at one noise level.
    Bound(BoundArgs),
    /// Bounds on P, a1, b1, B² and R over a grid of noise intensities.
    Scan(ScanArgs),
    /// Simulation and quadrature baselines.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Write the assembled moment problem in sparse SDPA format.
    Export(ExportArgs),
    /// Check oracle estimates against the intervals of a scan table.
    Compare(CompareArgs),
}

/// Forcing and noise parameters. Values are exact rationals: `0.3` and
/// `3/10` are the same number.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ForcingArgs {
    /// Forcing amplitude.
    #[arg(long = "A", default_value = "0.3")]
    pub amplitude: String,
    /// Forcing angular frequency.
    #[arg(long = "Omega", default_value = "0.5")]
    pub omega: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tol_feas: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_gap: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub forcing: ForcingArgs,
    /// Noise intensity.
    #[arg(long = "D", default_value = "0.5")]
    pub noise: String,
    /// Relaxation degree; moments up to order 2d enter.
    #[arg(long, default_value_t = 8)]
    pub d: u32,
    /// x1..x4, a1, b1, or a polynomial in the model variables. Repeatable.
    #[arg(long = "objective", value_delimiter = ',', default_values_t = ["x2".to_string(), "a1".to_string(), "b1".to_string()])]
    pub objectives: Vec<String>,
    /// Custom model (TOML); replaces the lifted forced double well.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the bound results as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Em,
    Fp,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[command(flatten)]
    pub forcing: ForcingArgs,
    /// Noise grid `lo:hi:n` (n uniformly spaced points, endpoints included).
    #[arg(long, default_value = "0.05:1:20")]
    pub grid: String,
    #[arg(long, default_value_t = 8)]
    pub d: u32,
    /// Concurrent rows; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Add oracle columns computed at every grid point.
    #[arg(long)]
    pub oracle: Option<OracleKind>,
    /// Seed for `--oracle em`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = "scan.csv")]
    pub csv: PathBuf,
    #[arg(long, default_value = "scan.json")]
    pub json: PathBuf,
    /// Include per-row wall times in the JSON output (breaks byte-stability).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleCommand {
    /// Euler-Maruyama ensemble.
    Em(EmArgs),
    /// Fokker-Planck finite-volume solver.
    Fp(FpArgs),
    /// Boltzmann moments of the unforced double well by quadrature.
    Quad(QuadArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EmArgs {
    #[command(flatten)]
    pub forcing: ForcingArgs,
    #[arg(long = "D", default_value = "0.5")]
    pub noise: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Total simulated time, in forcing periods.
    #[arg(long, default_value_t = 400)]
    pub periods: usize,
    /// Discarded transient, in forcing periods.
    #[arg(long, default_value_t = 8)]
    pub burn_in_periods: usize,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FpArgs {
    #[command(flatten)]
    pub forcing: ForcingArgs,
    #[arg(long = "D", default_value = "0.5")]
    pub noise: String,
    #[arg(long, default_value_t = 2001)]
    pub n_grid: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps_per_period: usize,
    #[arg(long, default_value_t = 400)]
    pub max_periods: usize,
    /// Half-width of the spatial domain `[-L, L]`.
    #[arg(long, default_value_t = 5.0)]
    pub half_width: f64,
    /// Skip the half-resolution run that estimates discretization error.
    #[arg(long)]
    pub no_error_proxy: bool,
    /// Also write the final-period trajectory and density.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuadArgs {
    #[arg(long = "D", default_value = "0.5")]
    pub noise: String,
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 4])]
    pub orders: Vec<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseArg {
    Min,
    Max,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub forcing: ForcingArgs,
    #[arg(long = "D", default_value = "0.5")]
    pub noise: String,
    #[arg(long, default_value_t = 8)]
    pub d: u32,
    #[arg(long, default_value = "a1")]
    pub objective: String,
    #[arg(long, value_enum, default_value_t = SenseArg::Min)]
    pub sense: SenseArg,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Scan table in JSON form.
    #[arg(long)]
    pub table: PathBuf,
    /// Oracle output files; each is matched to the row with the same D.
    #[arg(long = "oracle")]
    pub oracles: Vec<PathBuf>,
    /// Run an oracle at every table row with D >= --min-D.
    #[arg(long)]
    pub run: Option<OracleKind>,
    #[arg(long = "min-D", default_value_t = 0.3)]
    pub min_noise: f64,
    /// Standard errors of slack for Euler-Maruyama estimates.
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(&cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
