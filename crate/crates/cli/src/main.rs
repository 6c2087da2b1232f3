//! `zerocrit`: batch driver for the pair-correlation experiments.
//!
//! Exit codes: 0 success, 1 acceptance failure, 2 invalid configuration,
//! 3 numerical failure.

mod commands;
mod grid;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use zerocrit_core::correlator::CorrelatorError;
use zerocrit_core::estimator::EstimatorError;
use zerocrit_core::gafsim::GafError;
use zerocrit_core::projective::ProjectiveError;

#[derive(Debug)]
pub enum CliError {
    Acceptance(String),
    Config(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Acceptance(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Acceptance(m) => write!(f, "acceptance failure: {m}"),
            Self::Config(m) => write!(f, "invalid configuration: {m}"),
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<CorrelatorError> for CliError {
    fn from(e: CorrelatorError) -> Self {
        match e {
            CorrelatorError::QuadratureNoConvergence(_) | CorrelatorError::CovarianceInvalid(_) => {
                Self::Numerical(e.to_string())
            }
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<GafError> for CliError {
    fn from(e: GafError) -> Self {
        match e {
            GafError::RootFinding(_) | GafError::SuspectUndercount { .. } => Self::Numerical(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Exact(inner) => inner.into(),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<ProjectiveError> for CliError {
    fn from(e: ProjectiveError) -> Self {
        match e {
            ProjectiveError::DegreeOutOfRange(_) | ProjectiveError::BinsOutOfRange(_) => Self::Config(e.to_string()),
            ProjectiveError::Estimator(inner) => inner.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "zerocrit", version, about = "Zero / critical-point pair correlation of Gaussian analytic functions")]
pub struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "ZEROCRIT_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact correlation K(r) on an r-grid.
    Eval(EvalArgs),
    /// Monte Carlo estimate of the long-range constant c_m.
    Cm(CmArgs),
    /// Sample Gaussian analytic functions and write point patterns.
    Simulate(SimulateArgs),
    /// Empirical correlation curve from pattern files, compared with the exact curve.
    Estimate(EstimateArgs),
    /// SU(2) polynomial experiments on the sphere.
    Su2(Su2Args),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Render curve CSV files as SVG.
    Plot(PlotArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// start:stop:step (inclusive) or comma list, within [0.01, 6].
    #[arg(long)]
    pub r_grid: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Adds Monte Carlo columns with this many samples per point.
    #[arg(long, value_parser = grid::parse_count)]
    pub mc_samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long, default_value = "curve.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CmArgs {
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, value_parser = grid::parse_count, default_value = "1e6")]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sets η = 0 (diagnostic variant).
    #[arg(long)]
    pub zero_eta: bool,
    /// Stream label; different labels give independent estimates.
    #[arg(long, default_value = "cm")]
    pub stream: String,
    #[arg(short, long, default_value = "cm.json")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_parser = grid::parse_count)]
    pub samples: u64,
    #[arg(long)]
    pub window: f64,
    /// Truncation radius (default window + 1).
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also record holomorphic critical points.
    #[arg(long)]
    pub holo: bool,
    /// Write patterns as CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
    #[arg(short, long, default_value = "patterns")]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhichArg {
    Chern,
    Holo,
}

#[derive(Args, Debug, Serialize)]
pub struct EstimateArgs {
    /// Directory of JSON pattern files.
    #[arg(long)]
    pub patterns: PathBuf,
    /// Bin edges, start:stop:step or list.
    #[arg(long, default_value = "0.2:4:0.2")]
    pub bins: String,
    #[arg(long, value_enum, default_value = "chern")]
    pub which: WhichArg,
    /// Patterns live on the sphere of degree n in rescaled coordinates.
    #[arg(long)]
    pub sphere_n: Option<f64>,
    /// |z| threshold for the per-bin comparison.
    #[arg(long, default_value_t = 4.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(short, long, default_value = "estimate.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct Su2Args {
    #[command(subcommand)]
    pub mode: Su2Mode,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Su2Mode {
    /// Mean Chern-critical counts against 5n/3 − 14/9.
    Counts {
        #[arg(long, default_value = "50,100")]
        n: String,
        #[arg(long, value_parser = grid::parse_count, default_value = "500")]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "su2_counts.csv")]
        output: PathBuf,
    },
    /// Rescaled correlation near a point, compared with the flat limit.
    Correlation {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, value_parser = grid::parse_count, default_value = "5000")]
        samples: u64,
        #[arg(long, default_value = "0.2:4:0.2")]
        bins: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4.0)]
        threshold: f64,
        #[arg(short, long, default_value = "su2_curve.csv")]
        output: PathBuf,
    },
    /// Bergman kernel rescaling error for several degrees.
    Bergman {
        #[arg(long, default_value = "16,64,256,1024")]
        n: String,
        #[arg(long, default_value_t = 1.0)]
        box_radius: f64,
        #[arg(short, long, default_value = "bergman.csv")]
        output: PathBuf,
    },
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    /// Reduced sample sizes.
    #[arg(long)]
    pub quick: bool,
    /// Only these criteria (comma list).
    #[arg(long)]
    pub only: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long, default_value = "verify.json")]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct PlotArgs {
    /// Curve CSV files.
    #[arg(required = true)]
    pub curves: Vec<PathBuf>,
    /// Overlay the exact curve.
    #[arg(long)]
    pub exact: bool,
    #[arg(short, long, default_value = "curves.svg")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}

fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(a) => commands::eval(&a, argv),
        Command::Cm(a) => commands::cm(&a, argv),
        Command::Simulate(a) => commands::simulate(&a, argv),
        Command::Estimate(a) => commands::estimate(&a, argv),
        Command::Su2(a) => commands::su2(&a, argv),
        Command::Verify(a) => commands::verify(&a, argv),
        Command::Plot(a) => commands::plot(&a, argv),
        Command::Rerun(a) => {
            let m = manifest::Manifest::read(&a.manifest)?;
            if m.tool != manifest::TOOL {
                return Err(CliError::Config(format!("{} is not a {} manifest", a.manifest.display(), manifest::TOOL)));
            }
            let mut full = vec![manifest::TOOL.to_string()];
            full.extend(m.argv.iter().cloned());
            let replay = Cli::try_parse_from(&full).map_err(|e| CliError::Config(e.to_string()))?;
            if matches!(replay.command, Command::Rerun(_)) {
                return Err(CliError::Config("manifest records a rerun".into()));
            }
            run(replay, &m.argv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global() {
            eprintln!("{}", CliError::Config(e.to_string()));
            return ExitCode::from(2);
        }
    }
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zerocrit: {e}");
            ExitCode::from(e.code())
        }
    }
}
