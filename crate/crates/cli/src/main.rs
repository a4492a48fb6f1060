//! Batch front end for threshold curves, phase-transition sweeps, contour
//! extraction, universality comparison, ensemble diagnostics, and SVG
//! figures.
//!
//! Exit codes: 0 success, 1 I/O or runtime failure, 2 usage/validation.

mod commands;
mod plot;
mod range;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unirec_core::harness::{EnsembleTemplate, SweepPlan, TruthTemplate};
use unirec_core::model::{PenaltySpec, SolverConfig};

use range::parse_range;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<unirec_core::Error> for CliError {
    fn from(e: unirec_core::Error) -> Self {
        use unirec_core::Error::*;
        match e {
            InvalidParameter(_) | DimensionMismatch(_) | NotSymmetric(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "unirec", version, about = "Structured-recovery phase transition laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a theoretical threshold curve as CSV
    Theory(TheoryArgs),
    /// Run a seeded Monte Carlo sweep and save the grid as JSON
    Sweep(SweepArgs),
    /// Extract the success contour from a saved grid
    Contour(ContourArgs),
    /// Compare the contours of two grids differing only in ensemble
    Compare(CompareArgs),
    /// Empirical mean/power diagnostics for an ensemble
    Diagnose(DiagnoseArgs),
    /// Render a saved grid as an SVG heatmap with theory overlays
    Plot(PlotArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoryCurveArg {
    L1,
    Lowrank,
    SlOrder,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Gaussian,
    GaussianCorrelated,
    Bernoulli,
    ChiSquare,
    QuadraticGaussian,
    Wigner,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    SparseVector,
    LowrankPsd,
    SparseSymmetric,
    SparseLowrankPsd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PenaltyArg {
    L1,
    TracePsd,
    L1Matrix,
    L1MatrixPsd,
    L1PlusTrace,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ColorArg {
    SuccessRate,
    MeanRelError,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    curve: TheoryCurveArg,
    /// Sparsity fractions (l1): value or start:stop:step
    #[arg(long)]
    s: Option<String>,
    /// Ranks (lowrank): value or start:stop[:step]
    #[arg(long)]
    r: Option<String>,
    /// Submatrix sides (sl-order): value or start:stop[:step]
    #[arg(long)]
    k: Option<String>,
    /// Ambient dimension (sl-order)
    #[arg(long)]
    n: Option<usize>,
    /// Fixed rank (sl-order)
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// PSD-project the sparse-symmetric signal
    #[arg(long, default_value_t = false)]
    psd: bool,
    /// Fixed rank for sparse-lowrank-psd signals
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, value_enum)]
    ensemble: EnsembleArg,
    /// Bernoulli success probability
    #[arg(long, default_value_t = 0.8)]
    p: f64,
    /// Chi-square degrees of freedom
    #[arg(long, default_value_t = 1.0)]
    dof: f64,
    /// Penalty; defaults to the model's natural choice
    #[arg(long, value_enum)]
    penalty: Option<PenaltyArg>,
    /// Trace weight for the combined penalty
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    n: usize,
    /// Oversampling axis: value or start:stop:step
    #[arg(long)]
    delta: String,
    /// Sparsity-fraction axis (sparse models)
    #[arg(long)]
    s: Option<String>,
    /// Rank axis (lowrank-psd)
    #[arg(long)]
    r: Option<String>,
    /// Submatrix-side axis (sparse-lowrank-psd)
    #[arg(long)]
    k: Option<String>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SolverConfig::default().rho)]
    rho: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    max_iter: usize,
    #[arg(long, default_value_t = SolverConfig::default().eps_abs)]
    eps_abs: f64,
    #[arg(long, default_value_t = SolverConfig::default().eps_rel)]
    eps_rel: f64,
    #[arg(long, default_value_t = SolverConfig::default().success_threshold)]
    success_threshold: f64,
    /// Worker pool width; UNIREC_THREADS, then all cores, when absent
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ContourArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    grid_a: PathBuf,
    #[arg(long)]
    grid_b: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, value_enum)]
    ensemble: EnsembleArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    dof: f64,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Theory CSV overlays (repeatable)
    #[arg(long)]
    theory: Vec<PathBuf>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long, value_enum, default_value_t = ColorArg::SuccessRate)]
    color: ColorArg,
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Theory(a) => {
            let parse_opt = |o: &Option<String>| -> Result<Option<Vec<f64>>, CliError> {
                o.as_deref()
                    .map(|t| parse_range(t).map_err(CliError::Usage))
                    .transpose()
            };
            commands::run_theory(
                a.curve,
                parse_opt(&a.s)?,
                parse_opt(&a.r)?,
                parse_opt(&a.k)?,
                a.n,
                a.rank,
                &a.out,
            )
        }
        Command::Sweep(a) => {
            let plan = build_plan(&a)?;
            let threads = a.threads.or_else(threads_from_env);
            commands::run_sweep(plan, threads, &a.out)
        }
        Command::Contour(a) => commands::run_contour(&a.grid, a.level, a.out.as_deref()),
        Command::Compare(a) => commands::run_compare(&a.grid_a, &a.grid_b, a.out.as_deref()),
        Command::Diagnose(a) => {
            let template = ensemble_template(a.ensemble, a.p, a.dof);
            commands::run_diagnose(template, a.n, a.m, a.seed)
        }
        Command::Plot(a) => {
            let title = a.title.clone().unwrap_or_else(|| {
                a.grid
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let spec = plot::PlotSpec {
                grid_path: a.grid,
                theory_csvs: a.theory,
                output: a.out,
                title,
                color: match a.color {
                    ColorArg::SuccessRate => plot::ColorMap::SuccessRate,
                    ColorArg::MeanRelError => plot::ColorMap::MeanRelError,
                },
            };
            let svg = plot::render(&spec)?;
            std::fs::write(&spec.output, svg)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", spec.output.display())))?;
            println!("wrote {}", spec.output.display());
            Ok(())
        }
    }
}

fn threads_from_env() -> Option<usize> {
    std::env::var("UNIREC_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn ensemble_template(arg: EnsembleArg, p: f64, dof: f64) -> EnsembleTemplate {
    match arg {
        EnsembleArg::Gaussian => EnsembleTemplate::GaussianIid,
        EnsembleArg::GaussianCorrelated => EnsembleTemplate::GaussianCorrelated,
        EnsembleArg::Bernoulli => EnsembleTemplate::CenteredBernoulliMixed { p },
        EnsembleArg::ChiSquare => EnsembleTemplate::CenteredChiSquareMixed { dof },
        EnsembleArg::QuadraticGaussian => EnsembleTemplate::QuadraticGaussian,
        EnsembleArg::Wigner => EnsembleTemplate::WignerSurrogate,
    }
}

fn build_plan(a: &SweepArgs) -> Result<SweepPlan, CliError> {
    let truth = match a.model {
        ModelArg::SparseVector => TruthTemplate::SparseVector,
        ModelArg::LowrankPsd => TruthTemplate::LowRankPsd,
        ModelArg::SparseSymmetric => TruthTemplate::SparseSymmetric { psd: a.psd },
        ModelArg::SparseLowrankPsd => TruthTemplate::SparseLowRankPsd { r: a.rank },
    };
    let penalty = match a.penalty {
        Some(PenaltyArg::L1) => PenaltySpec::L1,
        Some(PenaltyArg::TracePsd) => PenaltySpec::TracePsd,
        Some(PenaltyArg::L1Matrix) => PenaltySpec::L1Matrix { psd: false },
        Some(PenaltyArg::L1MatrixPsd) => PenaltySpec::L1Matrix { psd: true },
        Some(PenaltyArg::L1PlusTrace) => PenaltySpec::L1PlusTracePsd { lambda: a.lambda },
        None => match a.model {
            ModelArg::SparseVector => PenaltySpec::L1,
            ModelArg::LowrankPsd => PenaltySpec::TracePsd,
            ModelArg::SparseSymmetric => PenaltySpec::L1Matrix { psd: a.psd },
            ModelArg::SparseLowrankPsd => PenaltySpec::L1PlusTracePsd { lambda: a.lambda },
        },
    };
    let ensemble = ensemble_template(a.ensemble, a.p, a.dof);
    let axis_flag = match a.model {
        ModelArg::SparseVector | ModelArg::SparseSymmetric => ("--s", &a.s),
        ModelArg::LowrankPsd => ("--r", &a.r),
        ModelArg::SparseLowrankPsd => ("--k", &a.k),
    };
    let structure_text = axis_flag
        .1
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("this model needs {}", axis_flag.0)))?;
    let structure_axis = parse_range(structure_text).map_err(CliError::Usage)?;
    let delta_axis = parse_range(&a.delta).map_err(CliError::Usage)?;

    let plan = SweepPlan {
        ensemble,
        truth,
        penalty,
        n: a.n,
        delta_axis,
        structure_axis,
        trials: a.trials,
        master_seed: a.seed,
        solver: SolverConfig {
            rho: a.rho,
            max_iter: a.max_iter,
            eps_abs: a.eps_abs,
            eps_rel: a.eps_rel,
            success_threshold: a.success_threshold,
        },
    };
    plan.validate()?;
    Ok(plan)
}
