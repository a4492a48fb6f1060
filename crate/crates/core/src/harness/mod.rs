//! Seeded Monte Carlo sweeps over (delta, structure) grids: the machinery
//! that produces empirical phase-transition diagrams.
//!
//! Each trial derives an independent ChaCha stream from the master seed
//! and its (delta, structure, trial) indices, so results are bit-identical
//! across runs and across worker counts. The mixing matrix of correlated
//! ensembles is redrawn inside every trial from that stream.

mod contour;
mod persist;

pub use contour::{contour, probit_fit, ContourCurve, ContourPoint, FitKind};
pub use persist::{cells_json, load_run, save_run, FORMAT_VERSION};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_operator_seeded, EnsembleSpec};
use crate::error::{Error, Result};
use crate::model::{generate_truth, PenaltySpec, RecoveryProblem, SolveStatus, SolverConfig, TruthKind};
use crate::solvers::solve;

/// Ensemble template: concrete mixing matrices are drawn per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnsembleTemplate {
    GaussianIid,
    /// Sigma = M M^T with M redrawn standard normal each trial.
    GaussianCorrelated,
    CenteredBernoulliMixed { p: f64 },
    CenteredChiSquareMixed { dof: f64 },
    QuadraticGaussian,
    WignerSurrogate,
}

impl EnsembleTemplate {
    fn needs_mixing(&self) -> bool {
        matches!(
            self,
            EnsembleTemplate::GaussianCorrelated
                | EnsembleTemplate::CenteredBernoulliMixed { .. }
                | EnsembleTemplate::CenteredChiSquareMixed { .. }
        )
    }

    fn is_matrix_ensemble(&self) -> bool {
        matches!(
            self,
            EnsembleTemplate::QuadraticGaussian | EnsembleTemplate::WignerSurrogate
        )
    }

    /// Builds the concrete spec for one trial. `dim` is the signal's
    /// ambient dimension (n for vectors, the matrix side for matrix
    /// ensembles); mixing matrices are drawn from `rng` here.
    pub fn instantiate<R: rand::Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> EnsembleSpec {
        let draw_mixing = |rng: &mut R| -> DMatrix<f64> {
            DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng))
        };
        match *self {
            EnsembleTemplate::GaussianIid => EnsembleSpec::GaussianIid { n: dim },
            EnsembleTemplate::GaussianCorrelated => EnsembleSpec::GaussianCorrelated {
                n: dim,
                mixing: draw_mixing(rng),
            },
            EnsembleTemplate::CenteredBernoulliMixed { p } => {
                EnsembleSpec::CenteredBernoulliMixed {
                    n: dim,
                    p,
                    mixing: draw_mixing(rng),
                }
            }
            EnsembleTemplate::CenteredChiSquareMixed { dof } => {
                EnsembleSpec::CenteredChiSquareMixed {
                    n: dim,
                    dof,
                    mixing: draw_mixing(rng),
                }
            }
            EnsembleTemplate::QuadraticGaussian => EnsembleSpec::QuadraticGaussian { n: dim },
            EnsembleTemplate::WignerSurrogate => EnsembleSpec::WignerSurrogate { n: dim },
        }
    }

    /// Concrete spec with any mixing matrix drawn from a fresh stream of
    /// the given seed.
    pub fn instantiate_seeded(&self, dim: usize, seed: u64) -> EnsembleSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.instantiate(dim, &mut rng)
    }
}

/// Signal template: the structure axis supplies the free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TruthTemplate {
    /// Structure value is the sparsity fraction s = k/n.
    SparseVector,
    /// Structure value is the rank r.
    LowRankPsd,
    /// Structure value is the sparsity fraction s = k/n^2.
    SparseSymmetric { psd: bool },
    /// Structure value is the nonzero submatrix side k; rank fixed here.
    SparseLowRankPsd { r: usize },
}

impl TruthTemplate {
    pub fn is_matrix(&self) -> bool {
        !matches!(self, TruthTemplate::SparseVector)
    }

    /// Measurement count for an oversampling ratio: m = round(delta * n)
    /// for vectors and low-rank matrices, m = round(delta * n^2) for
    /// sparse matrices.
    pub fn measurement_count(&self, delta: f64, n: usize) -> usize {
        match self {
            TruthTemplate::SparseSymmetric { .. } => (delta * (n * n) as f64).round() as usize,
            _ => (delta * n as f64).round() as usize,
        }
    }

    fn instantiate(&self, n: usize, structure: f64) -> Result<TruthKind> {
        let kind = match *self {
            TruthTemplate::SparseVector => {
                let k = ((structure * n as f64).round() as usize).max(1);
                TruthKind::SparseVector { n, k }
            }
            TruthTemplate::LowRankPsd => TruthKind::LowRankPsd {
                n,
                r: round_integer(structure)?,
            },
            TruthTemplate::SparseSymmetric { psd } => {
                let k = ((structure * (n * n) as f64).round() as usize).max(1);
                TruthKind::SparseSymmetric { n, k, psd }
            }
            TruthTemplate::SparseLowRankPsd { r } => TruthKind::SparseLowRankPsd {
                n,
                k: round_integer(structure)?,
                r,
            },
        };
        kind.validate()?;
        Ok(kind)
    }

    fn validate_structure(&self, v: f64, n: usize) -> Result<()> {
        match self {
            TruthTemplate::SparseVector | TruthTemplate::SparseSymmetric { .. } => {
                if !(v > 0.0 && v <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sparsity fraction must lie in (0,1], got {v}"
                    )));
                }
            }
            TruthTemplate::LowRankPsd => {
                let r = round_integer(v)?;
                if r < 1 || r > n {
                    return Err(Error::InvalidParameter(format!(
                        "rank must lie in [1, {n}], got {v}"
                    )));
                }
            }
            TruthTemplate::SparseLowRankPsd { r } => {
                let k = round_integer(v)?;
                if k < (*r).max(1) || k > n {
                    return Err(Error::InvalidParameter(format!(
                        "submatrix side must lie in [{}, {n}], got {v}",
                        (*r).max(1)
                    )));
                }
            }
        }
        Ok(())
    }
}

fn round_integer(v: f64) -> Result<usize> {
    let r = v.round();
    if !v.is_finite() || (v - r).abs() > 1e-9 || r < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "expected a nonnegative integer value, got {v}"
        )));
    }
    Ok(r as usize)
}

/// Full description of a Monte Carlo sweep; everything needed to
/// reproduce it bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub ensemble: EnsembleTemplate,
    pub truth: TruthTemplate,
    pub penalty: PenaltySpec,
    pub n: usize,
    pub delta_axis: Vec<f64>,
    pub structure_axis: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub solver: SolverConfig,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.penalty.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.trials > u32::MAX as usize {
            return Err(Error::InvalidParameter("trials exceeds the seed-stream budget".into()));
        }
        for (name, axis) in [("delta", &self.delta_axis), ("structure", &self.structure_axis)] {
            if axis.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} axis is empty")));
            }
            if axis.len() > u16::MAX as usize {
                return Err(Error::InvalidParameter(format!("{name} axis too long")));
            }
            if !axis.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} axis has non-finite values")));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} axis must be strictly ascending"
                )));
            }
        }
        for &delta in &self.delta_axis {
            if self.truth.measurement_count(delta, self.n) == 0 {
                return Err(Error::InvalidParameter(format!(
                    "delta = {delta} yields zero measurements at n = {}",
                    self.n
                )));
            }
        }
        for &s in &self.structure_axis {
            self.truth.validate_structure(s, self.n)?;
        }
        if self.penalty.is_matrix_penalty() != self.truth.is_matrix() {
            return Err(Error::InvalidParameter(
                "penalty and signal template disagree on matrix vs vector".into(),
            ));
        }
        if self.ensemble.is_matrix_ensemble() && !self.truth.is_matrix() {
            return Err(Error::InvalidParameter(
                "quadratic/Wigner ensembles need a matrix signal".into(),
            ));
        }
        if self.ensemble.needs_mixing() && self.truth.is_matrix() {
            return Err(Error::InvalidParameter(
                "mixed ensembles are defined for vector signals only".into(),
            ));
        }
        match self.ensemble {
            EnsembleTemplate::CenteredBernoulliMixed { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidParameter(format!("p must lie in (0,1), got {p}")));
                }
            }
            EnsembleTemplate::CenteredChiSquareMixed { dof } => {
                if !(dof >= 1.0) {
                    return Err(Error::InvalidParameter(format!("dof must be >= 1, got {dof}")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Row length of the measurement operator.
    fn signal_dim(&self) -> usize {
        if self.truth.is_matrix() {
            self.n * self.n
        } else {
            self.n
        }
    }

    /// Sampling dimension handed to the ensemble template: matrix
    /// ensembles draw n-dimensional probe vectors/matrices, everything
    /// else draws in the signal dimension.
    fn ensemble_dim(&self) -> usize {
        if self.ensemble.is_matrix_ensemble() {
            self.n
        } else {
            self.signal_dim()
        }
    }
}

/// Per-trial record; cells aggregate these.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub success: bool,
    pub rel_error: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// One grid cell, aggregated over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub delta: f64,
    pub structure: f64,
    pub trials: usize,
    pub successes: usize,
    pub mean_rel_error: f64,
    pub mean_iters: f64,
}

/// Monte Carlo success counts over the (delta, structure) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub plan: SweepPlan,
    /// Structure-major order: cells[si * n_delta + di].
    pub cells: Vec<GridCell>,
}

impl PhaseGrid {
    pub fn cell(&self, delta_index: usize, structure_index: usize) -> &GridCell {
        &self.cells[structure_index * self.plan.delta_axis.len() + delta_index]
    }
}

/// ChaCha stream id for a trial: the indices are packed injectively.
fn trial_stream(delta_index: usize, structure_index: usize, trial_index: usize) -> u64 {
    ((delta_index as u64) << 48) | ((structure_index as u64) << 32) | trial_index as u64
}

/// Runs one seeded trial: draws the mixing matrix (when the ensemble has
/// one), the ground truth, and the operator from the trial stream, then
/// solves. Solver failures are recorded as unsuccessful trials.
pub fn run_trial(
    plan: &SweepPlan,
    delta_index: usize,
    structure_index: usize,
    trial_index: usize,
) -> Result<TrialOutcome> {
    if delta_index >= plan.delta_axis.len()
        || structure_index >= plan.structure_axis.len()
        || trial_index >= plan.trials
    {
        return Err(Error::InvalidParameter("trial indices out of range".into()));
    }
    let delta = plan.delta_axis[delta_index];
    let structure = plan.structure_axis[structure_index];

    let mut rng = ChaCha8Rng::seed_from_u64(plan.master_seed);
    rng.set_stream(trial_stream(delta_index, structure_index, trial_index));

    // Draw order is part of the reproducibility contract:
    // mixing matrix, then truth, then operator rows.
    let spec = plan.ensemble.instantiate(plan.ensemble_dim(), &mut rng);
    let kind = plan.truth.instantiate(plan.n, structure)?;
    let truth = generate_truth(&kind, &mut rng)?;
    let m = plan.truth.measurement_count(delta, plan.n);
    let operator = sample_operator_seeded(&spec, m, plan.master_seed, &mut rng)?;
    let problem = RecoveryProblem::new(operator, truth, plan.penalty)?;

    match solve(&problem, &plan.solver) {
        Ok(sol) => Ok(TrialOutcome {
            success: sol.rel_error <= plan.solver.success_threshold,
            rel_error: sol.rel_error,
            iterations: sol.iterations,
            status: sol.status,
        }),
        Err(Error::NumericalFailure(_)) => Ok(TrialOutcome {
            success: false,
            rel_error: 1.0,
            iterations: 0,
            status: SolveStatus::NumericalFailure,
        }),
        Err(e) => Err(e),
    }
}

/// Runs the full grid. Trials execute in parallel on the current rayon
/// pool; aggregation is a fixed-order reduction over the indexed results,
/// so the outcome is independent of scheduling.
pub fn sweep(plan: &SweepPlan) -> Result<PhaseGrid> {
    plan.validate()?;
    let n_delta = plan.delta_axis.len();
    let n_structure = plan.structure_axis.len();
    let trials = plan.trials;
    let total = n_delta * n_structure * trials;

    let outcomes: Vec<TrialOutcome> = (0..total)
        .into_par_iter()
        .map(|task| {
            let cell = task / trials;
            let ti = task % trials;
            let si = cell / n_delta;
            let di = cell % n_delta;
            run_trial(plan, di, si, ti)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(n_delta * n_structure);
    for si in 0..n_structure {
        for di in 0..n_delta {
            let base = (si * n_delta + di) * trials;
            let slice = &outcomes[base..base + trials];
            let successes = slice.iter().filter(|o| o.success).count();
            let mean_rel_error =
                slice.iter().map(|o| o.rel_error).sum::<f64>() / trials as f64;
            let mean_iters =
                slice.iter().map(|o| o.iterations as f64).sum::<f64>() / trials as f64;
            cells.push(GridCell {
                delta: plan.delta_axis[di],
                structure: plan.structure_axis[si],
                trials,
                successes,
                mean_rel_error,
                mean_iters,
            });
        }
    }
    Ok(PhaseGrid {
        plan: plan.clone(),
        cells,
    })
}

/// Like [`sweep`] but on a dedicated pool of the given width.
pub fn sweep_with_threads(plan: &SweepPlan, threads: usize) -> Result<PhaseGrid> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;
    pool.install(|| sweep(plan))
}

/// Per-structure contour comparison between two grids that differ only in
/// their measurement ensemble.
#[derive(Debug, Clone)]
pub struct UniversalityReport {
    /// (structure, delta_half of a, delta_half of b, |difference|).
    pub columns: Vec<(f64, Option<f64>, Option<f64>, Option<f64>)>,
    /// Maximum |difference| over columns where both contours exist.
    pub max_abs_diff: Option<f64>,
}

pub fn compare_universality(a: &PhaseGrid, b: &PhaseGrid) -> Result<UniversalityReport> {
    let pa = &a.plan;
    let pb = &b.plan;
    let compatible = pa.truth == pb.truth
        && pa.penalty == pb.penalty
        && pa.n == pb.n
        && pa.delta_axis == pb.delta_axis
        && pa.structure_axis == pb.structure_axis
        && pa.trials == pb.trials;
    if !compatible {
        return Err(Error::DimensionMismatch(
            "grids must share every plan field except the ensemble".into(),
        ));
    }
    let ca = contour(a, 0.5);
    let cb = contour(b, 0.5);
    let mut columns = Vec::new();
    let mut max_abs_diff: Option<f64> = None;
    for (qa, qb) in ca.points.iter().zip(cb.points.iter()) {
        let diff = match (qa.delta_half, qb.delta_half) {
            (Some(x), Some(y)) => {
                let d = (x - y).abs();
                max_abs_diff = Some(max_abs_diff.map_or(d, |m: f64| m.max(d)));
                Some(d)
            }
            _ => None,
        };
        columns.push((qa.structure, qa.delta_half, qb.delta_half, diff));
    }
    Ok(UniversalityReport {
        columns,
        max_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> SweepPlan {
        SweepPlan {
            ensemble: EnsembleTemplate::GaussianIid,
            truth: TruthTemplate::SparseVector,
            penalty: PenaltySpec::L1,
            n: 16,
            delta_axis: vec![0.5],
            structure_axis: vec![0.125],
            trials: 1,
            master_seed: 7,
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn square_system_cell_always_succeeds() {
        let mut plan = small_plan();
        plan.delta_axis = vec![1.0];
        let grid = sweep(&plan).unwrap();
        assert_eq!(grid.cells.len(), 1);
        assert_eq!(grid.cells[0].successes, 1);
    }

    #[test]
    fn zero_measurement_cell_is_rejected_at_validation() {
        let mut plan = small_plan();
        plan.delta_axis = vec![0.01]; // round(0.01 * 16) = 0
        assert!(plan.validate().is_err());
    }

    #[test]
    fn repeated_trials_are_bit_identical() {
        let plan = small_plan();
        let a = run_trial(&plan, 0, 0, 0).unwrap();
        let b = run_trial(&plan, 0, 0, 0).unwrap();
        assert_eq!(a.success, b.success);
        assert!(a.rel_error == b.rel_error, "rel_error differs bitwise");
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn single_cell_sweep_matches_run_trial() {
        let plan = small_plan();
        let grid = sweep(&plan).unwrap();
        let t = run_trial(&plan, 0, 0, 0).unwrap();
        assert_eq!(grid.cells[0].successes, t.success as usize);
        assert_eq!(grid.cells[0].mean_rel_error, t.rel_error);
        assert_eq!(grid.cells[0].mean_iters, t.iterations as f64);
    }

    #[test]
    fn sweep_results_are_independent_of_worker_count() {
        let mut plan = small_plan();
        plan.delta_axis = vec![0.4, 0.7, 1.0];
        plan.trials = 4;
        let serial = sweep_with_threads(&plan, 1).unwrap();
        let parallel = sweep_with_threads(&plan, 4).unwrap();
        assert_eq!(cells_json(&serial), cells_json(&parallel));
    }

    #[test]
    fn trial_stream_packing_is_injective_on_plan_bounds() {
        let a = trial_stream(1, 2, 3);
        let b = trial_stream(2, 1, 3);
        let c = trial_stream(1, 2, 4);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn identical_grids_compare_to_zero() {
        let mut plan = small_plan();
        plan.delta_axis = vec![0.25, 0.5, 0.75, 1.0];
        plan.trials = 3;
        let g = sweep(&plan).unwrap();
        let report = compare_universality(&g, &g).unwrap();
        if let Some(d) = report.max_abs_diff {
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn mismatched_axes_are_rejected() {
        let mut plan_a = small_plan();
        plan_a.delta_axis = vec![0.5, 1.0];
        let mut plan_b = plan_a.clone();
        plan_b.delta_axis = vec![0.5, 0.75];
        let (mut ga, mut gb) = (sweep(&plan_a).unwrap(), sweep(&plan_b).unwrap());
        ga.plan = plan_a;
        gb.plan = plan_b;
        assert!(compare_universality(&ga, &gb).is_err());
    }

    #[test]
    fn plan_validation_catches_incompatible_pairings() {
        let mut plan = small_plan();
        plan.ensemble = EnsembleTemplate::QuadraticGaussian;
        assert!(plan.validate().is_err());

        let mut plan = small_plan();
        plan.truth = TruthTemplate::LowRankPsd;
        plan.structure_axis = vec![1.0];
        // penalty still L1: vector penalty with matrix truth
        assert!(plan.validate().is_err());

        let mut plan = small_plan();
        plan.structure_axis = vec![0.2, 0.1];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn matrix_trial_round_trip() {
        let plan = SweepPlan {
            ensemble: EnsembleTemplate::WignerSurrogate,
            truth: TruthTemplate::LowRankPsd,
            penalty: PenaltySpec::TracePsd,
            n: 8,
            delta_axis: vec![4.0],
            structure_axis: vec![1.0],
            trials: 2,
            master_seed: 11,
            solver: SolverConfig::default(),
        };
        let grid = sweep(&plan).unwrap();
        assert_eq!(grid.cells[0].trials, 2);
        assert!(grid.cells[0].successes >= 1, "rank-1 at delta 4 should mostly recover");
    }
}
