//! Success-contour extraction: the estimated delta at 50% success per
//! structure value, via a probit maximum-likelihood fit with a linear
//! interpolation fallback.

use serde::{Deserialize, Serialize};

use crate::harness::PhaseGrid;
use crate::theory::{gauss_pdf, q_function};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitKind {
    ProbitMl,
    LinearInterp,
}

impl std::fmt::Display for FitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitKind::ProbitMl => "ProbitMl",
            FitKind::LinearInterp => "LinearInterp",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContourPoint {
    pub structure: f64,
    /// Absent when the success rate never crosses the level.
    pub delta_half: Option<f64>,
    pub fit: FitKind,
}

#[derive(Debug, Clone)]
pub struct ContourCurve {
    pub points: Vec<ContourPoint>,
    pub level: f64,
}

impl ContourCurve {
    /// CSV with header `structure,delta_half,fit`; columns without a
    /// crossing are omitted.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            if let Some(d) = p.delta_half {
                out.push_str(&format!("{},{d},{}\n", p.structure, p.fit));
            }
        }
        out
    }
}

/// Extracts the level crossing per structure column.
///
/// Columns with at least two mixed cells (0 < successes < trials) get a
/// probit maximum-likelihood fit of success probability against delta;
/// otherwise, or when the fit degenerates, the crossing is linearly
/// interpolated between the bracketing cells. The result is clamped to
/// the delta axis range.
pub fn contour(grid: &PhaseGrid, level: f64) -> ContourCurve {
    let deltas = &grid.plan.delta_axis;
    let n_delta = deltas.len();
    let mut points = Vec::with_capacity(grid.plan.structure_axis.len());

    for (si, &structure) in grid.plan.structure_axis.iter().enumerate() {
        let cells = &grid.cells[si * n_delta..(si + 1) * n_delta];
        let successes: Vec<usize> = cells.iter().map(|c| c.successes).collect();
        let trials: Vec<usize> = cells.iter().map(|c| c.trials).collect();
        let rates: Vec<f64> = successes
            .iter()
            .zip(trials.iter())
            .map(|(&s, &t)| s as f64 / t as f64)
            .collect();

        let crosses =
            rates.iter().any(|&r| r >= level) && rates.iter().any(|&r| r < level);
        if !crosses {
            points.push(ContourPoint {
                structure,
                delta_half: None,
                fit: FitKind::LinearInterp,
            });
            continue;
        }

        let mixed = rates.iter().filter(|&&r| r > 0.0 && r < 1.0).count();
        let probit = if mixed >= 2 {
            probit_fit(deltas, &successes, &trials).and_then(|(a, b)| {
                if b > 0.0 {
                    Some(-a / b)
                } else {
                    None
                }
            })
        } else {
            None
        };

        let (delta_half, fit) = match probit {
            Some(d) => (d, FitKind::ProbitMl),
            None => (linear_crossing(deltas, &rates, level), FitKind::LinearInterp),
        };
        let clamped = delta_half.clamp(deltas[0], deltas[n_delta - 1]);
        points.push(ContourPoint {
            structure,
            delta_half: Some(clamped),
            fit,
        });
    }
    ContourCurve { points, level }
}

/// Crossing of the empirical rates by linear interpolation between the
/// first adjacent pair bracketing the level from below.
fn linear_crossing(deltas: &[f64], rates: &[f64], level: f64) -> f64 {
    for j in 0..rates.len().saturating_sub(1) {
        if rates[j] < level && rates[j + 1] >= level {
            let t = (level - rates[j]) / (rates[j + 1] - rates[j]);
            return deltas[j] + t * (deltas[j + 1] - deltas[j]);
        }
    }
    // Non-monotone column without an upward bracket: first cell at or
    // above the level.
    for (j, &r) in rates.iter().enumerate() {
        if r >= level {
            return deltas[j];
        }
    }
    deltas[rates.len() - 1]
}

/// Probit maximum likelihood: success probability Phi(a + b * delta),
/// fitted by Fisher scoring. Returns (a, b), or None when the fit
/// degenerates (non-finite updates or runaway slope).
pub fn probit_fit(deltas: &[f64], successes: &[usize], trials: &[usize]) -> Option<(f64, f64)> {
    let normal_cdf = |z: f64| 1.0 - q_function(z);
    // Init from a rough crossing location and the axis span.
    let rates: Vec<f64> = successes
        .iter()
        .zip(trials)
        .map(|(&k, &n)| k as f64 / n as f64)
        .collect();
    let d50 = linear_crossing(deltas, &rates, 0.5);
    let span = deltas[deltas.len() - 1] - deltas[0];
    let mut b = 4.0 / span.max(1e-12);
    let mut a = -b * d50;

    for _ in 0..200 {
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        let mut i00 = 0.0;
        let mut i01 = 0.0;
        let mut i11 = 0.0;
        for ((&d, &k), &n) in deltas.iter().zip(successes).zip(trials) {
            let z = a + b * d;
            let p = normal_cdf(z).clamp(1e-12, 1.0 - 1e-12);
            let pdf = gauss_pdf(z);
            let w = pdf / (p * (1.0 - p));
            let resid = k as f64 - n as f64 * p;
            g0 += w * resid;
            g1 += w * resid * d;
            let info = n as f64 * pdf * w;
            i00 += info;
            i01 += info * d;
            i11 += info * d * d;
        }
        let det = i00 * i11 - i01 * i01;
        if !det.is_finite() || det.abs() < 1e-300 {
            return None;
        }
        let da = (i11 * g0 - i01 * g1) / det;
        let db = (-i01 * g0 + i00 * g1) / det;
        a += da;
        b += db;
        if !(a.is_finite() && b.is_finite()) || b.abs() > 1e8 {
            return None;
        }
        if da.abs() <= 1e-10 && db.abs() <= 1e-10 {
            break;
        }
    }
    Some((a, b))
}
