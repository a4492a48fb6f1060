//! Proximal operators for the separable penalties.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::solvers::eig::eigh;

/// Entrywise shrinkage: sign(v_i) * max(|v_i| - t, 0).
pub fn soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    assert!(t >= 0.0, "soft_threshold: t must be nonnegative");
    v.map(|x| {
        let shrunk = x.abs() - t;
        if shrunk > 0.0 {
            shrunk * x.signum()
        } else {
            0.0
        }
    })
}

/// In-place variant used by the solver hot loop.
pub fn soft_threshold_mut(v: &mut DVector<f64>, t: f64) {
    for x in v.iter_mut() {
        let shrunk = x.abs() - t;
        *x = if shrunk > 0.0 { shrunk * x.signum() } else { 0.0 };
    }
}

/// Frobenius-nearest PSD matrix: eigenvalues clamped at zero.
pub fn project_psd(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    prox_trace_psd(x, 0.0)
}

/// Prox of t * tr(Z) over the PSD cone: eigenvalues mapped to max(lambda - t, 0).
pub fn prox_trace_psd(x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    assert!(t >= 0.0, "prox_trace_psd: t must be nonnegative");
    let eig = eigh(x)?;
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (idx, &lambda) in eig.values.iter().enumerate() {
        let shifted = lambda - t;
        if shifted > 0.0 {
            let col = eig.vectors.column(idx);
            out.syger(shifted, &col, &col, 1.0);
        }
    }
    // syger fills the lower triangle; mirror.
    for i in 0..n {
        for j in (i + 1)..n {
            out[(i, j)] = out[(j, i)];
        }
    }
    Ok(out)
}
