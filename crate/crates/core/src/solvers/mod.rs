//! Exact solvers for the convex estimator: minimize the penalty subject
//! to the linear measurement constraints (and the PSD cone where the
//! penalty demands it).

mod admm;
mod affine;
mod eig;
mod oracle;
mod prox;

pub use affine::AffineProjector;
pub use eig::{eigh, EighResult};
pub use oracle::{solve_oracle_l1, OracleResult};
pub use prox::{project_psd, prox_trace_psd, soft_threshold};

use crate::error::Result;
use crate::model::{PenaltySpec, RecoveryProblem, Solution, SolverConfig};
use crate::ensembles::EnsembleSpec;
use admm::{consensus_three_block, two_block, AdmmParams, PenaltyProx};

/// Solves one recovery instance by operator splitting.
///
/// Two-block ADMM covers `L1`, `L1Matrix { psd: false }` and `TracePsd`;
/// the PSD-constrained l1 penalties use three-block consensus splitting.
/// The returned estimate is the affine-projected block, so Converged
/// solutions satisfy the measurement constraints to projection accuracy.
pub fn solve(problem: &RecoveryProblem, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let proj = AffineProjector::new(problem.operator.rows.clone(), problem.y.clone())?;
    solve_with_projector(problem, &proj, cfg)
}

/// Like [`solve`] but reuses a prebuilt projector (the m x m factorization
/// is the expensive part of setup).
pub fn solve_with_projector(
    problem: &RecoveryProblem,
    proj: &AffineProjector,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    let side = problem.truth.kind.matrix_side();
    // Reflecting iterates onto the symmetric subspace is only valid when
    // every measurement row is itself a symmetric matrix.
    let symmetrize = side.is_some()
        && matches!(
            problem.operator.spec,
            EnsembleSpec::QuadraticGaussian { .. } | EnsembleSpec::WignerSurrogate { .. }
        );
    let params = AdmmParams {
        rho: cfg.rho,
        max_iter: cfg.max_iter,
        eps_abs: cfg.eps_abs,
        eps_rel: cfg.eps_rel,
        side,
        symmetrize,
    };

    let outcome = match problem.penalty {
        PenaltySpec::L1 | PenaltySpec::L1Matrix { psd: false } => {
            two_block(proj, PenaltyProx::L1, &params)?
        }
        PenaltySpec::TracePsd => {
            two_block(proj, PenaltyProx::TracePsd { weight: 1.0 }, &params)?
        }
        PenaltySpec::L1Matrix { psd: true } => consensus_three_block(proj, 0.0, &params)?,
        PenaltySpec::L1PlusTracePsd { lambda } => {
            consensus_three_block(proj, lambda, &params)?
        }
    };

    let truth_norm = problem.truth.norm();
    let diff = &outcome.estimate - &problem.truth.values;
    let rel_error = if truth_norm > 0.0 {
        diff.norm() / truth_norm
    } else {
        outcome.estimate.norm()
    };
    let objective = problem
        .penalty
        .value(&outcome.estimate, side.unwrap_or(0));
    Ok(Solution {
        estimate: outcome.estimate,
        objective,
        rel_error,
        iterations: outcome.iterations,
        status: outcome.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_operator, EnsembleSpec, MeasurementOperator};
    use crate::model::{generate_truth, GroundTruth, SolveStatus, TruthKind};
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn manual_operator(rows: DMatrix<f64>) -> MeasurementOperator {
        let n = rows.ncols();
        MeasurementOperator {
            rows,
            spec: EnsembleSpec::GaussianIid { n },
            seed: 0,
        }
    }

    fn vector_truth(values: Vec<f64>, k: usize) -> GroundTruth {
        let n = values.len();
        GroundTruth {
            kind: TruthKind::SparseVector { n, k },
            values: DVector::from_vec(values),
        }
    }

    #[test]
    fn square_system_recovers_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = sample_operator(&EnsembleSpec::GaussianIid { n: 6 }, 6, &mut rng).unwrap();
        let truth = generate_truth(&TruthKind::SparseVector { n: 6, k: 2 }, &mut rng).unwrap();
        let problem = RecoveryProblem::new(op, truth, PenaltySpec::L1).unwrap();
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.rel_error <= 1e-6, "rel_error {}", sol.rel_error);
    }

    #[test]
    fn analytic_line_instance() {
        // min |x1| + |x2| s.t. x1 + 2 x2 = 2 has optimum (0, 1), objective 1.
        let op = manual_operator(DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        let truth = vector_truth(vec![0.0, 1.0], 1);
        let problem = RecoveryProblem::new(op, truth, PenaltySpec::L1).unwrap();
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.objective - 1.0).abs() <= 1e-5);
        assert!(sol.estimate[0].abs() <= 1e-5);
        assert!((sol.estimate[1] - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn trace_psd_recovers_rank_one_above_threshold() {
        // Wigner surrogate at delta = 4 (comfortably past the rank-one
        // transition): expect at least 18 of 20 seeded recoveries.
        let n = 8;
        let m = 32;
        let mut successes = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let truth = generate_truth(&TruthKind::LowRankPsd { n, r: 1 }, &mut rng).unwrap();
            let op =
                sample_operator(&EnsembleSpec::WignerSurrogate { n }, m, &mut rng).unwrap();
            let problem = RecoveryProblem::new(op, truth, PenaltySpec::TracePsd).unwrap();
            let sol = solve(&problem, &SolverConfig::default()).unwrap();
            if sol.rel_error <= 1e-3 {
                successes += 1;
            }
        }
        assert!(successes >= 18, "only {successes}/20 recoveries");
    }

    #[test]
    fn converged_solutions_are_feasible_and_do_not_beat_the_truth_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 24;
            let m = 18;
            let truth =
                generate_truth(&TruthKind::SparseVector { n, k: 3 }, &mut rng).unwrap();
            let op = sample_operator(&EnsembleSpec::GaussianIid { n }, m, &mut rng).unwrap();
            let problem = RecoveryProblem::new(op, truth, PenaltySpec::L1).unwrap();
            let cfg = SolverConfig::default();
            let sol = solve(&problem, &cfg).unwrap();
            assert_eq!(sol.status, SolveStatus::Converged);
            let resid = (&problem.operator.rows * &sol.estimate - &problem.y).norm()
                / problem.y.norm().max(1.0);
            assert!(resid <= cfg.eps_abs, "residual {resid}");
            let f_truth = problem.penalty.value(&problem.truth.values, 0);
            assert!(
                sol.objective <= f_truth + 1e-5 * (1.0 + f_truth.abs()),
                "objective {} vs truth {f_truth}",
                sol.objective
            );
        }
    }

    #[test]
    fn estimate_is_invariant_under_row_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 16;
        let m = 10;
        let truth = generate_truth(&TruthKind::SparseVector { n, k: 2 }, &mut rng).unwrap();
        let op = sample_operator(&EnsembleSpec::GaussianIid { n }, m, &mut rng).unwrap();
        let cfg = SolverConfig::default();

        let scaled = MeasurementOperator {
            rows: &op.rows * 17.0,
            spec: op.spec.clone(),
            seed: op.seed,
        };
        let p1 = RecoveryProblem::new(op, truth.clone(), PenaltySpec::L1).unwrap();
        let p2 = RecoveryProblem::new(scaled, truth, PenaltySpec::L1).unwrap();
        let s1 = solve(&p1, &cfg).unwrap();
        let s2 = solve(&p2, &cfg).unwrap();
        assert_eq!(s1.status, SolveStatus::Converged);
        assert_eq!(s2.status, SolveStatus::Converged);
        assert!(
            (s1.estimate - s2.estimate).norm() <= 10.0 * cfg.eps_abs,
            "scale invariance violated"
        );
    }

    #[test]
    fn psd_penalties_return_nearly_psd_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 6;
        for penalty in [
            PenaltySpec::TracePsd,
            PenaltySpec::L1Matrix { psd: true },
            PenaltySpec::L1PlusTracePsd { lambda: 0.5 },
        ] {
            let truth = generate_truth(&TruthKind::LowRankPsd { n, r: 1 }, &mut rng).unwrap();
            let op =
                sample_operator(&EnsembleSpec::QuadraticGaussian { n }, 30, &mut rng).unwrap();
            let problem = RecoveryProblem::new(op, truth, penalty).unwrap();
            let sol = solve(&problem, &SolverConfig::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Converged, "{penalty:?}");
            let m = devectorize_est(&sol.estimate, n);
            let eig = eigh(&((&m + m.transpose()) / 2.0)).unwrap();
            assert!(
                eig.values[n - 1] >= -1e-6,
                "{penalty:?}: min eigenvalue {}",
                eig.values[n - 1]
            );
        }
    }

    fn devectorize_est(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
        crate::model::devectorize(v, n)
    }

    #[test]
    fn sparse_symmetric_l1_recovery_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 8;
        let truth =
            generate_truth(&TruthKind::SparseSymmetric { n, k: 6, psd: false }, &mut rng)
                .unwrap();
        let op = sample_operator(&EnsembleSpec::WignerSurrogate { n }, 40, &mut rng).unwrap();
        let problem =
            RecoveryProblem::new(op, truth, PenaltySpec::L1Matrix { psd: false }).unwrap();
        let sol = solve(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(sol.rel_error <= 1e-3, "rel_error {}", sol.rel_error);
    }
}
