//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Dense and dependency-free; entirely adequate at the matrix sizes this
//! crate works with (n <= 64). Deterministic sweep order keeps results
//! reproducible across runs and platforms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius tolerance, relative to the input norm.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Asymmetry tolerance on the input, relative to max(1, ||S||_F).
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EighResult {
    /// Eigenvalues in descending order.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, column i pairing with values[i].
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of a symmetric matrix.
///
/// Errors if the input is not symmetric to within 1e-10 (relative).
pub fn eigh(s: &DMatrix<f64>) -> Result<EighResult> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigh expects a square matrix, got {}x{}",
            n,
            s.ncols()
        )));
    }
    let scale = s.norm().max(1.0);
    let asym = (s - s.transpose()).abs().max();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }

    let mut a = (s + s.transpose()) / 2.0;
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = JACOBI_TOL * s.norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..MAX_SWEEPS {
        let mut off_sq = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if off_sq.sqrt() <= tol {
            break;
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                let app = a[(p, p)];
                let aqq = a[(q, q)];
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip - sn * aiq;
                        a[(p, i)] = a[(i, p)];
                        a[(i, q)] = sn * aip + c * aiq;
                        a[(q, i)] = a[(i, q)];
                    }
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - sn * viq;
                    v[(i, q)] = sn * vip + c * viq;
                }
            }
        }
    }

    // Sort descending, carrying eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let values = DVector::from_fn(n, |i, _| a[(order[i], order[i])]);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).copy_from(&v.column(src));
    }
    Ok(EighResult { values, vectors })
}
