//! Phase-transition predictions: the sparse-recovery threshold in both its
//! nonlinear-equation and variational (statistical-dimension) forms, the
//! linear low-rank threshold, a Monte Carlo estimator of the l1 descent-cone
//! width, and the order-level rule for simultaneously structured matrices.
//!
//! The two sparse forms are tied by a change of variables: at the optimal
//! bandwidth tau the variational value equals exactly twice the equation
//! root. Both are always computed and reported so experiments can settle
//! which normalization a given problem family follows (vector problems
//! track the variational value; symmetric-matrix problems track the root,
//! whose ambient count n^2 double-covers the symmetric subspace).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard normal density.
pub fn gauss_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail Q(t) = P(g > t) for standard normal g.
pub fn q_function(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

/// Inverse of the Q-function by safeguarded Newton, to |Q(t) - p| <= 1e-13.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "q_inverse requires p in (0,1), got {p}"
        )));
    }
    // Bracket: Q is strictly decreasing, Q(-40) ~ 1, Q(40) ~ 0. Newton
    // steps run until they stall in t, not merely until Q(t) is close to
    // p: near the tails Q is so flat that p-space accuracy alone leaves
    // t off by far more than the round-trip contract allows.
    let mut lo = -40.0f64;
    let mut hi = 40.0f64;
    let mut t = 0.0f64;
    for _ in 0..200 {
        let q = q_function(t);
        let err = q - p;
        if err > 0.0 {
            lo = t; // Q too big => t too small
        } else if err < 0.0 {
            hi = t;
        } else {
            return Ok(t);
        }
        let pdf = gauss_pdf(t);
        let newton = t + err / pdf;
        let next = if pdf > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 1e-14 * t.abs().max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// E[(|g| - tau)_+^2] for standard normal g, in closed form.
pub fn expected_clipped_sq(tau: f64) -> f64 {
    2.0 * ((1.0 + tau * tau) * q_function(tau) - tau * gauss_pdf(tau))
}

/// The variational objective whose minimum over tau >= 0 is the sparse
/// recovery threshold at sparsity fraction s.
pub fn statdim_objective(tau: f64, s: f64) -> f64 {
    s * (1.0 + tau * tau) + (1.0 - s) * expected_clipped_sq(tau)
}

#[derive(Debug, Clone, Copy)]
pub struct SparseThreshold {
    /// Root of x * Qinv((2x-s)/(2-2s)) = (1-s) * pdf(Qinv(...)).
    pub x_root: f64,
    /// min over tau >= 0 of the statistical-dimension objective.
    pub delta_statdim: f64,
}

/// Sparse-recovery threshold at sparsity fraction s, in both forms.
pub fn sparse_delta_star(s: f64) -> Result<SparseThreshold> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "sparsity fraction must lie in (0,1), got {s}"
        )));
    }
    let x_root = eq_delta_root(s)?;
    let tau_star = statdim_stationary_tau(s);
    let delta_statdim = statdim_objective(tau_star, s);
    Ok(SparseThreshold {
        x_root,
        delta_statdim,
    })
}

/// Residual of the nonlinear threshold equation at x.
pub fn eq_delta_residual(x: f64, s: f64) -> Result<f64> {
    let arg = (2.0 * x - s) / (2.0 - 2.0 * s);
    let tau = q_inverse(arg)?;
    Ok(x * tau - (1.0 - s) * gauss_pdf(tau))
}

fn eq_delta_root(s: f64) -> Result<f64> {
    // The Q-inverse argument stays in (0,1) for x in (s/2, 1 - s/2); the
    // residual runs from +inf to -inf over that interval and crosses once.
    let margin = 1e-13;
    let mut lo = s / 2.0 + margin * (1.0 - s).max(1e-6);
    let mut hi = 1.0 - s / 2.0 - margin * (1.0 - s).max(1e-6);
    let g_lo = eq_delta_residual(lo, s)?;
    let g_hi = eq_delta_residual(hi, s)?;
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::NumericalFailure(format!(
            "no sign change bracketing the threshold equation at s = {s}"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let g = eq_delta_residual(x, s)?;
        if g.abs() <= 1e-13 {
            return Ok(x);
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // dg/dx = -x / ((1-s) * pdf(tau)); Newton step with bisection guard.
        let arg = (2.0 * x - s) / (2.0 - 2.0 * s);
        let tau = q_inverse(arg)?;
        let deriv = -x / ((1.0 - s) * gauss_pdf(tau));
        let newton = x - g / deriv;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

/// Stationary point of the (strictly convex) variational objective.
fn statdim_stationary_tau(s: f64) -> f64 {
    // d/dtau = 2 s tau + 4 (1-s) (tau Q(tau) - pdf(tau)); negative at 0,
    // positive for large tau.
    let deriv =
        |tau: f64| 2.0 * s * tau + 4.0 * (1.0 - s) * (tau * q_function(tau) - gauss_pdf(tau));
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while deriv(hi) < 0.0 {
        hi *= 2.0;
        if hi > 64.0 {
            break;
        }
    }
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        let d = deriv(tau);
        if d.abs() <= 1e-14 {
            break;
        }
        if d > 0.0 {
            hi = tau;
        } else {
            lo = tau;
        }
        // Second derivative: 2s + 4(1-s) Q(tau).
        let d2 = 2.0 * s + 4.0 * (1.0 - s) * q_function(tau);
        let newton = tau - d / d2;
        tau = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-12 {
            break;
        }
    }
    tau
}

/// Exact low-rank threshold: delta* = 3 r (delta normalized as m/n).
pub fn lowrank_delta_star(r: usize) -> f64 {
    3.0 * r as f64
}

/// Order-level measurement count min(k^2, r n) for a rank-r matrix whose
/// nonzeros fill a k x k submatrix. ORDER ONLY: no leading constant.
pub fn sl_order(k: usize, r: usize, n: usize) -> Result<usize> {
    if !(1 <= k && k <= n) {
        return Err(Error::InvalidParameter(format!(
            "sl_order requires 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if !(1 <= r && r <= k) {
        return Err(Error::InvalidParameter(format!(
            "sl_order requires 1 <= r <= k, got r = {r}, k = {k}"
        )));
    }
    Ok((k * k).min(r * n))
}

#[derive(Debug, Clone, Copy)]
pub struct WidthEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo estimate of the normalized l1 descent-cone width for a
/// k-sparse signal in R^n under identity covariance.
///
/// Each sample draws a Gaussian probe and minimizes the squared distance
/// to the scaled subdifferential over the scaling tau >= 0; the distance
/// is convex in tau, so bisection on its subgradient finds the minimum.
pub fn width_l1_mc<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    num_samples: usize,
    rng: &mut R,
) -> Result<WidthEstimate> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "width_l1_mc requires 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    if num_samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    // By sign and permutation symmetry the support may be fixed to the
    // first k coordinates with +1 signs.
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut g = vec![0.0f64; n];
    for _ in 0..num_samples {
        for gi in g.iter_mut() {
            *gi = StandardNormal.sample(rng);
        }
        let d2 = min_dist_sq_to_scaled_subdiff(&g, k) / n as f64;
        sum += d2;
        sum_sq += d2 * d2;
    }
    let mean = sum / num_samples as f64;
    let var = (sum_sq - num_samples as f64 * mean * mean) / (num_samples as f64 - 1.0);
    Ok(WidthEstimate {
        mean,
        stderr: (var.max(0.0) / num_samples as f64).sqrt(),
    })
}

fn min_dist_sq_to_scaled_subdiff(g: &[f64], k: usize) -> f64 {
    let dist_sq = |tau: f64| -> f64 {
        let mut d = 0.0;
        for &gi in &g[..k] {
            d += (gi - tau) * (gi - tau);
        }
        for &gi in &g[k..] {
            let excess = gi.abs() - tau;
            if excess > 0.0 {
                d += excess * excess;
            }
        }
        d
    };
    // d/dtau = 2 k tau - 2 sum_supp g - 2 sum_off (|g| - tau)_+,
    // nondecreasing in tau.
    let grad = |tau: f64| -> f64 {
        let mut s = k as f64 * tau;
        for &gi in &g[..k] {
            s -= gi;
        }
        for &gi in &g[k..] {
            let excess = gi.abs() - tau;
            if excess > 0.0 {
                s -= excess;
            }
        }
        2.0 * s
    };
    if grad(0.0) >= 0.0 {
        return dist_sq(0.0);
    }
    let mut lo = 0.0f64;
    let mut hi = (g.iter().map(|v| v.abs()).sum::<f64>()) / k as f64 + 1.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    dist_sq(0.5 * (lo + hi))
}

/// Which prediction a theory curve carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveMethod {
    EqDeltaRoot,
    StatDimL1,
    ThreeR,
    WidthMc,
    OrderMinK2Rn,
}

impl std::fmt::Display for CurveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CurveMethod::EqDeltaRoot => "EqDeltaRoot",
            CurveMethod::StatDimL1 => "StatDimL1",
            CurveMethod::ThreeR => "ThreeR",
            CurveMethod::WidthMc => "WidthMc",
            CurveMethod::OrderMinK2Rn => "OrderMinK2Rn",
        };
        f.write_str(name)
    }
}

/// A predicted threshold curve over a structure axis.
#[derive(Debug, Clone)]
pub struct TheoryCurve {
    pub structure_axis: Vec<f64>,
    pub delta_star: Vec<f64>,
    pub method: CurveMethod,
}

impl TheoryCurve {
    /// CSV with header `structure,delta_star,method`, one row per point.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (s, d) in self.structure_axis.iter().zip(self.delta_star.iter()) {
            out.push_str(&format!("{s},{d},{}\n", self.method));
        }
        out
    }
}

/// Both sparse-threshold curves over a sparsity axis.
pub fn l1_curves(s_axis: &[f64]) -> Result<(TheoryCurve, TheoryCurve)> {
    let mut roots = Vec::with_capacity(s_axis.len());
    let mut statdims = Vec::with_capacity(s_axis.len());
    for &s in s_axis {
        let t = sparse_delta_star(s)?;
        roots.push(t.x_root);
        statdims.push(t.delta_statdim);
    }
    Ok((
        TheoryCurve {
            structure_axis: s_axis.to_vec(),
            delta_star: statdims,
            method: CurveMethod::StatDimL1,
        },
        TheoryCurve {
            structure_axis: s_axis.to_vec(),
            delta_star: roots,
            method: CurveMethod::EqDeltaRoot,
        },
    ))
}

pub fn lowrank_curve(r_axis: &[usize]) -> TheoryCurve {
    TheoryCurve {
        structure_axis: r_axis.iter().map(|&r| r as f64).collect(),
        delta_star: r_axis.iter().map(|&r| lowrank_delta_star(r)).collect(),
        method: CurveMethod::ThreeR,
    }
}
