//! `fusion`: synthesize data, run chains, check convergence and emit curve
//! data for plotting.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 diagnostics failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fusion", version, about = "Fiducial-Bayes Gibbs sampling for the bivariate normal model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a dataset whose summary statistics equal the targets exactly.
    Simulate(SimulateArgs),
    /// Run one or more chains and write traces, a summary and a manifest.
    Run(RunArgs),
    /// Gelman-Rubin diagnostics over two or more trace files.
    Diagnose(DiagnoseArgs),
    /// Tabulate a reference density as `value,density` CSV.
    Curves(CurvesArgs),
    /// Compare a uniform-random scan with fixed scan orders.
    CompareScans(CompareArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.0925, allow_negative_numbers = true)]
    mean_x: f64,
    #[arg(long, default_value_t = 1.053)]
    sd_x: f64,
    #[arg(long, default_value_t = 0.0400, allow_negative_numbers = true)]
    mean_y: f64,
    #[arg(long, default_value_t = 0.866)]
    sd_y: f64,
    #[arg(long, default_value_t = 0.780, allow_negative_numbers = true)]
    corr: f64,
    /// Defaults to $FUSION_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: PathBuf,
}

/// Sampler settings that override the configuration file.
#[derive(Args, Debug, Default)]
struct SamplerOverrides {
    /// JSON configuration; the worked-example prior is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "iters")]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Falls back to the configuration file, then $FUSION_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed truncation bound for the rho conditional.
    #[arg(long, conflicts_with = "safety")]
    alpha: Option<f64>,
    /// Fraction of the largest admissible truncation bound.
    #[arg(long)]
    safety: Option<f64>,
    /// Keep the initial proposal scales during burn-in.
    #[arg(long)]
    no_adapt: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// CSV with header `x,y`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, short)]
    out_dir: PathBuf,
    #[arg(long)]
    chains: Option<usize>,
    /// `uniform` or a comma-separated order of all five parameters.
    #[arg(long)]
    scan: Option<String>,
    #[command(flatten)]
    sampler: SamplerOverrides,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value_t = fusion_core::analysis::DEFAULT_PSRF_THRESHOLD)]
    threshold: f64,
    /// Also write the report here.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CurveKindArg {
    PriorMu,
    PriorSigma,
    FiducialMu,
    FiducialSigma,
    ConfidenceRho,
    FiducialRhoConditional,
    NormalMeanFiducial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    X,
    Y,
}

#[derive(Args, Debug)]
struct CurvesArgs {
    kind: CurveKindArg,
    #[arg(long, value_enum, default_value_t = SideArg::X)]
    side: SideArg,
    /// Prior constants for the prior curves.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Take sample statistics from this CSV instead of the worked example.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    xbar: Option<f64>,
    /// Sample standard deviation.
    #[arg(long)]
    s: Option<f64>,
    /// Sample correlation for confidence-rho.
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho_hat: Option<f64>,
    /// Defaults to 0.9 of the largest admissible bound.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = fusion_core::analysis::DEFAULT_GRID_POINTS)]
    points: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    /// Fixed orders, e.g. `rho,mu_x,sigma2_x,mu_y,sigma2_y`.
    #[arg(long = "order", required = true, num_args = 1..)]
    orders: Vec<String>,
    #[command(flatten)]
    sampler: SamplerOverrides,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Run(a) => commands::run(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Curves(a) => commands::curves(a),
        Command::CompareScans(a) => commands::compare_scans(a),
    };
    match result {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::DiagnosticsFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
