//! Operator-splitting loops: two-block ADMM for a single penalty prox,
//! and three-block consensus ADMM when the feasible set adds a PSD
//! constraint on top of an l1 penalty.
//!
//! The affine block is returned as the estimate, so Converged solutions
//! satisfy the measurement constraints to projection accuracy. The primal
//! stopping threshold is 0.45 * eps_abs in absolute terms: the penalty
//! block is exactly PSD (or exactly thresholded), so bounding the block
//! disagreement keeps the returned iterate within eps_abs of the cone
//! even in the three-block case, where two block gaps can add up.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::model::{devectorize, matrix_to_vec, SolveStatus};
use crate::solvers::affine::AffineProjector;
use crate::solvers::prox::{prox_trace_psd, soft_threshold_mut};

const PRIMAL_MARGIN: f64 = 0.45;

pub(crate) struct AdmmParams {
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Matrix side when the unknown is a vectorized matrix.
    pub side: Option<usize>,
    /// Reflect iterates onto the symmetric subspace after projection
    /// (valid only when the measurement rows are themselves symmetric).
    pub symmetrize: bool,
}

pub(crate) struct AdmmOutcome {
    pub estimate: DVector<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Penalty prox applied by the z-block.
pub(crate) enum PenaltyProx {
    /// soft_threshold(v, weight / rho)
    L1,
    /// prox of (weight * tr + PSD indicator) / rho
    TracePsd { weight: f64 },
}

impl PenaltyProx {
    fn apply(&self, v: &mut DVector<f64>, rho: f64, side: Option<usize>) -> Result<()> {
        match self {
            PenaltyProx::L1 => {
                soft_threshold_mut(v, 1.0 / rho);
                Ok(())
            }
            PenaltyProx::TracePsd { weight } => {
                let n = side.expect("TracePsd prox needs a matrix side");
                let m = devectorize(v, n);
                // Symmetrizing first makes the prox exact for the
                // symmetric-PSD feasible set even when the input carries
                // rounding asymmetry.
                let sym = (&m + m.transpose()) / 2.0;
                let p = prox_trace_psd(&sym, weight / rho)?;
                v.copy_from(&matrix_to_vec(&p));
                Ok(())
            }
        }
    }
}

fn symmetrize_vec(v: &mut DVector<f64>, n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (v[i * n + j] + v[j * n + i]) / 2.0;
            v[i * n + j] = avg;
            v[j * n + i] = avg;
        }
    }
}

/// min penalty(x) s.t. A x = y, split as affine block + one penalty prox.
pub(crate) fn two_block(
    proj: &AffineProjector,
    prox: PenaltyProx,
    p: &AdmmParams,
) -> Result<AdmmOutcome> {
    let dim = proj.a.ncols();
    let mut x = DVector::zeros(dim);
    let mut z = DVector::zeros(dim);
    let mut u = DVector::zeros(dim);
    let mut z_old = DVector::zeros(dim);
    let mut resid = DVector::zeros(dim);
    let mut work_m = DVector::zeros(proj.a.nrows());

    for it in 1..=p.max_iter {
        x.copy_from(&z);
        x -= &u;
        proj.project_inplace(&mut x, &mut work_m);
        if p.symmetrize {
            symmetrize_vec(&mut x, p.side.unwrap());
        }

        z_old.copy_from(&z);
        z.copy_from(&x);
        z += &u;
        prox.apply(&mut z, p.rho, p.side)?;

        u += &x;
        u -= &z;

        resid.copy_from(&x);
        resid -= &z;
        let pri = resid.norm();
        resid.copy_from(&z);
        resid -= &z_old;
        let dual = p.rho * resid.norm();

        if !pri.is_finite() || !dual.is_finite() {
            let estimate = if z_old.iter().all(|v| v.is_finite()) {
                z_old
            } else {
                DVector::zeros(dim)
            };
            return Ok(AdmmOutcome {
                estimate,
                iterations: it,
                status: SolveStatus::NumericalFailure,
            });
        }
        if pri <= PRIMAL_MARGIN * p.eps_abs
            && dual <= p.eps_abs + p.eps_rel * p.rho * u.norm()
        {
            return Ok(AdmmOutcome {
                estimate: x,
                iterations: it,
                status: SolveStatus::Converged,
            });
        }
    }
    Ok(AdmmOutcome {
        estimate: x,
        iterations: p.max_iter,
        status: SolveStatus::MaxIters,
    })
}

/// min l1(x) + trace_weight * tr(x) s.t. A x = y, x PSD, split over three
/// consensus blocks (affine, l1, PSD/trace) with equal weights.
pub(crate) fn consensus_three_block(
    proj: &AffineProjector,
    trace_weight: f64,
    p: &AdmmParams,
) -> Result<AdmmOutcome> {
    let dim = proj.a.ncols();
    let blocks = 3usize;
    let mut x: Vec<DVector<f64>> = (0..blocks).map(|_| DVector::zeros(dim)).collect();
    let mut u: Vec<DVector<f64>> = (0..blocks).map(|_| DVector::zeros(dim)).collect();
    let mut zbar = DVector::zeros(dim);
    let mut zbar_old = DVector::zeros(dim);
    let mut resid = DVector::zeros(dim);
    let mut work_m = DVector::zeros(proj.a.nrows());

    let l1_prox = PenaltyProx::L1;
    let psd_prox = PenaltyProx::TracePsd { weight: trace_weight };

    for it in 1..=p.max_iter {
        // Block updates from the shared consensus point.
        for (i, xi) in x.iter_mut().enumerate() {
            xi.copy_from(&zbar);
            *xi -= &u[i];
            match i {
                0 => {
                    proj.project_inplace(xi, &mut work_m);
                    if p.symmetrize {
                        symmetrize_vec(xi, p.side.unwrap());
                    }
                }
                1 => l1_prox.apply(xi, p.rho, p.side)?,
                _ => psd_prox.apply(xi, p.rho, p.side)?,
            }
        }

        zbar_old.copy_from(&zbar);
        zbar.fill(0.0);
        for (xi, ui) in x.iter().zip(u.iter()) {
            zbar += xi;
            zbar += ui;
        }
        zbar /= blocks as f64;

        let mut pri_sq = 0.0;
        for (xi, ui) in x.iter().zip(u.iter_mut()) {
            *ui += xi;
            *ui -= &zbar;
            resid.copy_from(xi);
            resid -= &zbar;
            pri_sq += resid.norm_squared();
        }
        let pri = pri_sq.sqrt();
        resid.copy_from(&zbar);
        resid -= &zbar_old;
        let dual = p.rho * (blocks as f64).sqrt() * resid.norm();
        let dual_scale = p.rho * u.iter().map(|ui| ui.norm_squared()).sum::<f64>().sqrt();

        if !pri.is_finite() || !dual.is_finite() {
            let estimate = if zbar_old.iter().all(|v| v.is_finite()) {
                zbar_old
            } else {
                DVector::zeros(dim)
            };
            return Ok(AdmmOutcome {
                estimate,
                iterations: it,
                status: SolveStatus::NumericalFailure,
            });
        }
        if pri <= PRIMAL_MARGIN * p.eps_abs && dual <= p.eps_abs + p.eps_rel * dual_scale {
            return Ok(AdmmOutcome {
                estimate: x.swap_remove(0),
                iterations: it,
                status: SolveStatus::Converged,
            });
        }
    }
    Ok(AdmmOutcome {
        estimate: x.swap_remove(0),
        iterations: p.max_iter,
        status: SolveStatus::MaxIters,
    })
}

/// Symmetric part reflection used by matrix solvers, exposed for tests.
#[allow(dead_code)]
pub(crate) fn symmetrize_for_test(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) / 2.0
}
