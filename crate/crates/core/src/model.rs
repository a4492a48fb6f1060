//! Domain types shared by every other module: structured ground-truth
//! signals, penalty functions, recovery problem instances and solver
//! output.
//!
//! All types here are immutable after construction and safe to share
//! across parallel workers.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural class of the unknown signal, with its shape parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TruthKind {
    /// k-sparse vector in R^n.
    SparseVector { n: usize, k: usize },
    /// n x n PSD matrix of rank r.
    LowRankPsd { n: usize, r: usize },
    /// Symmetric n x n matrix with k nonzero entries counted over all
    /// n^2 positions (an off-diagonal nonzero and its mirror count as two).
    SparseSymmetric { n: usize, k: usize, psd: bool },
    /// PSD rank-r matrix whose nonzeros live in a k x k principal submatrix.
    SparseLowRankPsd { n: usize, k: usize, r: usize },
}

impl TruthKind {
    /// Ambient dimension of the vectorized signal: n for vectors, n^2 for matrices.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            TruthKind::SparseVector { n, .. } => n,
            TruthKind::LowRankPsd { n, .. }
            | TruthKind::SparseSymmetric { n, .. }
            | TruthKind::SparseLowRankPsd { n, .. } => n * n,
        }
    }

    /// Matrix side length, or `None` for vector signals.
    pub fn matrix_side(&self) -> Option<usize> {
        match *self {
            TruthKind::SparseVector { .. } => None,
            TruthKind::LowRankPsd { n, .. }
            | TruthKind::SparseSymmetric { n, .. }
            | TruthKind::SparseLowRankPsd { n, .. } => Some(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            TruthKind::SparseVector { n, k } => {
                if n == 0 {
                    return bad("SparseVector: n must be positive".into());
                }
                if k > n {
                    return bad(format!("SparseVector: k={k} exceeds n={n}"));
                }
            }
            TruthKind::LowRankPsd { n, r } => {
                if n == 0 {
                    return bad("LowRankPsd: n must be positive".into());
                }
                if r > n {
                    return bad(format!("LowRankPsd: r={r} exceeds n={n}"));
                }
            }
            TruthKind::SparseSymmetric { n, k, .. } => {
                if n == 0 {
                    return bad("SparseSymmetric: n must be positive".into());
                }
                if k > n * n {
                    return bad(format!("SparseSymmetric: k={k} exceeds n^2={}", n * n));
                }
            }
            TruthKind::SparseLowRankPsd { n, k, r } => {
                if n == 0 {
                    return bad("SparseLowRankPsd: n must be positive".into());
                }
                if k > n {
                    return bad(format!("SparseLowRankPsd: k={k} exceeds n={n}"));
                }
                if r > k {
                    return bad(format!("SparseLowRankPsd: r={r} exceeds k={k}"));
                }
            }
        }
        Ok(())
    }
}

/// The unknown structured signal x0, stored vectorized (row-major for matrices).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub kind: TruthKind,
    pub values: DVector<f64>,
}

impl GroundTruth {
    /// Matrix form of the signal; errors for vector kinds.
    pub fn as_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self
            .kind
            .matrix_side()
            .ok_or_else(|| Error::InvalidParameter("signal is a vector, not a matrix".into()))?;
        Ok(devectorize(&self.values, n))
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

/// Convex penalty promoting the signal structure.
///
/// `TracePsd` and `L1PlusTracePsd` constrain the feasible set to the PSD
/// cone; `L1Matrix` does so only when `psd` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PenaltySpec {
    L1,
    TracePsd,
    L1Matrix { psd: bool },
    L1PlusTracePsd { lambda: f64 },
}

impl PenaltySpec {
    pub fn validate(&self) -> Result<()> {
        if let PenaltySpec::L1PlusTracePsd { lambda } = self {
            if !lambda.is_finite() || *lambda < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "lambda must be nonnegative, got {lambda}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the feasible set is the PSD cone.
    pub fn requires_psd(&self) -> bool {
        matches!(
            self,
            PenaltySpec::TracePsd
                | PenaltySpec::L1Matrix { psd: true }
                | PenaltySpec::L1PlusTracePsd { .. }
        )
    }

    /// Whether the penalty applies to a matrix-valued unknown.
    pub fn is_matrix_penalty(&self) -> bool {
        !matches!(self, PenaltySpec::L1)
    }

    /// Penalty value at a vectorized point. `side` is the matrix side for
    /// matrix penalties and ignored for `L1`.
    pub fn value(&self, v: &DVector<f64>, side: usize) -> f64 {
        match *self {
            PenaltySpec::L1 | PenaltySpec::L1Matrix { .. } => v.iter().map(|x| x.abs()).sum(),
            PenaltySpec::TracePsd => trace_of_vec(v, side),
            PenaltySpec::L1PlusTracePsd { lambda } => {
                v.iter().map(|x| x.abs()).sum::<f64>() + lambda * trace_of_vec(v, side)
            }
        }
    }
}

fn trace_of_vec(v: &DVector<f64>, side: usize) -> f64 {
    (0..side).map(|i| v[i * side + i]).sum()
}

/// One instance of the convex estimator: minimize `penalty` subject to
/// `operator * x = y`, where y was built exactly from the truth.
#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    pub operator: crate::ensembles::MeasurementOperator,
    pub y: DVector<f64>,
    pub truth: GroundTruth,
    pub penalty: PenaltySpec,
}

impl RecoveryProblem {
    /// Builds the noiseless instance y = A vec(x0).
    pub fn new(
        operator: crate::ensembles::MeasurementOperator,
        truth: GroundTruth,
        penalty: PenaltySpec,
    ) -> Result<Self> {
        penalty.validate()?;
        if operator.rows.ncols() != truth.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "operator has {} columns but truth has dimension {}",
                operator.rows.ncols(),
                truth.values.len()
            )));
        }
        if penalty.is_matrix_penalty() && truth.kind.matrix_side().is_none() {
            return Err(Error::InvalidParameter(
                "matrix penalty paired with a vector signal".into(),
            ));
        }
        let y = &operator.rows * &truth.values;
        Ok(RecoveryProblem {
            operator,
            y,
            truth,
            penalty,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    NumericalFailure,
}

/// Solver output for one recovery instance.
#[derive(Debug, Clone)]
pub struct Solution {
    pub estimate: DVector<f64>,
    /// Penalty value at the estimate.
    pub objective: f64,
    /// ||estimate - truth||_2 / ||truth||_2 (Frobenius for matrices).
    /// Falls back to ||estimate||_2 for a zero truth.
    pub rel_error: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Operator-splitting configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Relative-error cutoff defining "perfect recovery".
    pub success_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            max_iter: 50_000,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            success_threshold: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let all_pos = self.rho > 0.0
            && self.max_iter > 0
            && self.eps_abs > 0.0
            && self.eps_rel > 0.0
            && self.success_threshold > 0.0;
        if !all_pos {
            return Err(Error::InvalidParameter(
                "solver config fields must all be positive".into(),
            ));
        }
        if self.success_threshold <= 10.0 * self.eps_abs {
            return Err(Error::InvalidParameter(format!(
                "success_threshold {} must exceed 10 * eps_abs = {}",
                self.success_threshold,
                10.0 * self.eps_abs
            )));
        }
        Ok(())
    }
}

/// Row-major flattening; the identity on vectors.
pub fn vectorize(truth: &GroundTruth) -> DVector<f64> {
    truth.values.clone()
}

/// Inverse of the row-major flattening for n x n matrices.
pub fn devectorize(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), n * n, "devectorize: length mismatch");
    DMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

/// Row-major flattening of an n x n matrix.
pub fn matrix_to_vec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    DVector::from_fn(n * n, |idx, _| m[(idx / n, idx % n)])
}

/// Draws a ground-truth signal of the given kind.
///
/// Sparse supports are uniform without replacement and nonzero amplitudes
/// standard normal; low-rank PSD matrices are G G^T with G standard normal.
pub fn generate_truth<R: Rng + ?Sized>(kind: &TruthKind, rng: &mut R) -> Result<GroundTruth> {
    kind.validate()?;
    let values = match *kind {
        TruthKind::SparseVector { n, k } => {
            let mut v = DVector::zeros(n);
            for &i in sample_without_replacement(n, k, rng).iter() {
                v[i] = StandardNormal.sample(rng);
            }
            v
        }
        TruthKind::LowRankPsd { n, r } => {
            let g: DMatrix<f64> = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(rng));
            matrix_to_vec(&(&g * g.transpose()))
        }
        TruthKind::SparseSymmetric { n, k, psd } => {
            let mut m = sparse_symmetric_matrix(n, k, rng)?;
            if psd {
                m = crate::solvers::project_psd(&m)?;
            }
            matrix_to_vec(&m)
        }
        TruthKind::SparseLowRankPsd { n, k, r } => {
            let support = sample_without_replacement(n, k, rng);
            let g: DMatrix<f64> = DMatrix::from_fn(k, r, |_, _| StandardNormal.sample(rng));
            let block = &g * g.transpose();
            let mut m = DMatrix::zeros(n, n);
            for (bi, &i) in support.iter().enumerate() {
                for (bj, &j) in support.iter().enumerate() {
                    m[(i, j)] = block[(bi, bj)];
                }
            }
            matrix_to_vec(&m)
        }
    };
    Ok(GroundTruth {
        kind: kind.clone(),
        values,
    })
}

fn sample_without_replacement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Symmetric matrix with exactly k nonzeros over all n^2 positions.
///
/// Off-diagonal nonzeros come in mirrored pairs, so the number of diagonal
/// nonzeros d must satisfy d = k (mod 2); we use the smallest feasible d
/// (0 or 1 except when k exceeds the off-diagonal capacity n(n-1)).
fn sparse_symmetric_matrix<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let offdiag_capacity = n * (n - 1);
    let d = if k > offdiag_capacity {
        k - offdiag_capacity
    } else {
        k % 2
    };
    if d > n {
        return Err(Error::InvalidParameter(format!(
            "SparseSymmetric: cannot place k={k} nonzeros in a {n}x{n} symmetric matrix"
        )));
    }
    let pairs = (k - d) / 2;

    let mut m = DMatrix::zeros(n, n);
    for &i in sample_without_replacement(n, d, rng).iter() {
        m[(i, i)] = StandardNormal.sample(rng);
    }
    let upper = n * (n - 1) / 2;
    for &flat in sample_without_replacement(upper, pairs, rng).iter() {
        let (i, j) = upper_triangle_position(n, flat);
        let v: f64 = StandardNormal.sample(rng);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// Maps a flat index in 0..n(n-1)/2 to a strictly-upper-triangle (i, j).
fn upper_triangle_position(n: usize, flat: usize) -> (usize, usize) {
    let mut rem = flat;
    for i in 0..n {
        let row_len = n - 1 - i;
        if rem < row_len {
            return (i, i + 1 + rem);
        }
        rem -= row_len;
    }
    unreachable!("flat index out of range")
}
