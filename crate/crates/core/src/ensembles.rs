//! Samplers for the measurement-vector distributions, plus empirical
//! diagnostics for the moment conditions the recovery theory assumes.
//!
//! Mixed ensembles draw raw vectors with iid entries, center and scale
//! them to unit variance, then multiply by the mixing matrix M, so any
//! two ensembles sharing M also share mean and covariance. Quadratic and
//! Wigner-surrogate ensembles produce rows of length n^2 that reshape to
//! symmetric matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::matrix_to_vec;

/// Distribution of one measurement row.
#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleSpec {
    /// Rows iid N(0, I_n).
    GaussianIid { n: usize },
    /// Rows iid N(0, M M^T).
    GaussianCorrelated { n: usize, mixing: DMatrix<f64> },
    /// Centered, unit-variance Bernoulli(p) entries mixed by M.
    CenteredBernoulliMixed { n: usize, p: f64, mixing: DMatrix<f64> },
    /// Centered, unit-variance chi-square(dof) entries mixed by M.
    CenteredChiSquareMixed { n: usize, dof: f64, mixing: DMatrix<f64> },
    /// Rows vec(a a^T) with a ~ N(0, I_n); row length n^2.
    QuadraticGaussian { n: usize },
    /// Rows vec(H + I) with H Gaussian Wigner (off-diagonal N(0,1),
    /// diagonal N(0,2)); row length n^2.
    WignerSurrogate { n: usize },
}

impl EnsembleSpec {
    /// Length of one measurement row.
    pub fn row_dim(&self) -> usize {
        match *self {
            EnsembleSpec::GaussianIid { n }
            | EnsembleSpec::GaussianCorrelated { n, .. }
            | EnsembleSpec::CenteredBernoulliMixed { n, .. }
            | EnsembleSpec::CenteredChiSquareMixed { n, .. } => n,
            EnsembleSpec::QuadraticGaussian { n } | EnsembleSpec::WignerSurrogate { n } => n * n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_mixing = |n: usize, m: &DMatrix<f64>| -> Result<()> {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "mixing matrix is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(())
        };
        match self {
            EnsembleSpec::GaussianIid { n }
            | EnsembleSpec::QuadraticGaussian { n }
            | EnsembleSpec::WignerSurrogate { n } => {
                if *n == 0 {
                    return Err(Error::InvalidParameter("n must be positive".into()));
                }
            }
            EnsembleSpec::GaussianCorrelated { n, mixing } => check_mixing(*n, mixing)?,
            EnsembleSpec::CenteredBernoulliMixed { n, p, mixing } => {
                check_mixing(*n, mixing)?;
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Bernoulli p must lie in (0,1), got {p}"
                    )));
                }
            }
            EnsembleSpec::CenteredChiSquareMixed { n, dof, mixing } => {
                check_mixing(*n, mixing)?;
                if !(*dof >= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "chi-square dof must be >= 1, got {dof}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A realized m x N measurement matrix together with its provenance.
#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    pub rows: DMatrix<f64>,
    pub spec: EnsembleSpec,
    pub seed: u64,
}

/// Draws one raw measurement vector into `buf` (length n or n^2).
fn fill_row<R: Rng + ?Sized>(spec: &EnsembleSpec, buf: &mut DVector<f64>, rng: &mut R) {
    match spec {
        EnsembleSpec::GaussianIid { n } => {
            for i in 0..*n {
                buf[i] = StandardNormal.sample(rng);
            }
        }
        EnsembleSpec::GaussianCorrelated { n, mixing } => {
            let raw = DVector::from_fn(*n, |_, _| StandardNormal.sample(rng));
            buf.gemv(1.0, mixing, &raw, 0.0);
        }
        EnsembleSpec::CenteredBernoulliMixed { n, p, mixing } => {
            let sigma = (p * (1.0 - p)).sqrt();
            let raw = DVector::from_fn(*n, |_, _| {
                let x = if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
                (x - p) / sigma
            });
            buf.gemv(1.0, mixing, &raw, 0.0);
        }
        EnsembleSpec::CenteredChiSquareMixed { n, dof, mixing } => {
            let chi = ChiSquared::new(*dof).expect("dof validated");
            let sigma = (2.0 * dof).sqrt();
            let raw = DVector::from_fn(*n, |_, _| (chi.sample(rng) - dof) / sigma);
            buf.gemv(1.0, mixing, &raw, 0.0);
        }
        EnsembleSpec::QuadraticGaussian { n } => {
            let a: DVector<f64> = DVector::from_fn(*n, |_, _| StandardNormal.sample(rng));
            for i in 0..*n {
                for j in 0..*n {
                    buf[i * n + j] = a[i] * a[j];
                }
            }
        }
        EnsembleSpec::WignerSurrogate { n } => {
            let n = *n;
            let mut h = DMatrix::zeros(n, n);
            for i in 0..n {
                let d: f64 = StandardNormal.sample(rng);
                h[(i, i)] = d * std::f64::consts::SQRT_2 + 1.0;
                for j in (i + 1)..n {
                    let v: f64 = StandardNormal.sample(rng);
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
            buf.copy_from(&matrix_to_vec(&h));
        }
    }
}

/// Samples an operator with m iid rows from the given ensemble.
///
/// Deterministic given (spec, m, rng state); the caller-provided seed is
/// recorded on the operator for provenance only.
pub fn sample_operator_seeded<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    m: usize,
    seed: u64,
    rng: &mut R,
) -> Result<MeasurementOperator> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::InvalidParameter("row count m must be >= 1".into()));
    }
    let dim = spec.row_dim();
    let mut rows = DMatrix::zeros(m, dim);
    let mut buf = DVector::zeros(dim);
    for i in 0..m {
        fill_row(spec, &mut buf, rng);
        rows.row_mut(i).copy_from(&buf.transpose());
    }
    Ok(MeasurementOperator {
        rows,
        spec: spec.clone(),
        seed,
    })
}

pub fn sample_operator<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    m: usize,
    rng: &mut R,
) -> Result<MeasurementOperator> {
    sample_operator_seeded(spec, m, 0, rng)
}

/// Maximum entrywise deviations between the empirical first two moments
/// of two ensembles.
#[derive(Debug, Clone, Copy)]
pub struct MomentDeviation {
    pub mean_dev: f64,
    pub cov_dev: f64,
}

/// Compares empirical mean vectors and covariance matrices of two specs,
/// each estimated from `samples` fresh rows.
pub fn second_moment_match<R: Rng + ?Sized>(
    spec_a: &EnsembleSpec,
    spec_b: &EnsembleSpec,
    samples: usize,
    rng: &mut R,
) -> Result<MomentDeviation> {
    if spec_a.row_dim() != spec_b.row_dim() {
        return Err(Error::DimensionMismatch(format!(
            "row dims differ: {} vs {}",
            spec_a.row_dim(),
            spec_b.row_dim()
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let (mean_a, cov_a) = empirical_moments(spec_a, samples, rng)?;
    let (mean_b, cov_b) = empirical_moments(spec_b, samples, rng)?;
    Ok(MomentDeviation {
        mean_dev: (mean_a - mean_b).abs().max(),
        cov_dev: (cov_a - cov_b).abs().max(),
    })
}

fn empirical_moments<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    samples: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let dim = spec.row_dim();
    let mut mean = DVector::zeros(dim);
    let mut second = DMatrix::zeros(dim, dim);
    let mut buf = DVector::zeros(dim);
    for _ in 0..samples {
        fill_row(spec, &mut buf, rng);
        mean += &buf;
        second.syger(1.0, &buf, &buf, 1.0);
    }
    mean /= samples as f64;
    // Unbiased covariance from the accumulated second moment.
    let mf = samples as f64;
    let mut cov = (second - mf * (&mean * mean.transpose())) / (mf - 1.0);
    // syger only fills the lower triangle; mirror it.
    for i in 0..dim {
        for j in (i + 1)..dim {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok((mean, cov))
}

/// Empirical statistics for the bounded-mean and bounded-power conditions.
///
/// `mean_ratio` estimates ||mu||^2 / E||a - mu||^2 (with the sampling bias
/// of ||mu_hat||^2 removed and the result clamped at zero); `power_ratio`
/// estimates Var(||a||^2) / E^2[||a - mu||^2]. For well-behaved ensembles
/// both decay with n: a standard Gaussian has power_ratio = 2/n exactly.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionDiagnostics {
    pub mean_ratio: f64,
    pub power_ratio: f64,
    pub n: usize,
    pub m: usize,
}

/// [`diagnose`] with a self-contained ChaCha stream.
pub fn diagnose_with_seed(spec: &EnsembleSpec, m: usize, seed: u64) -> Result<AssumptionDiagnostics> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    diagnose(spec, m, &mut rng)
}

pub fn diagnose<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    m: usize,
    rng: &mut R,
) -> Result<AssumptionDiagnostics> {
    spec.validate()?;
    if m < 30 {
        return Err(Error::InvalidParameter(
            "diagnose needs at least 30 samples".into(),
        ));
    }
    let dim = spec.row_dim();
    let mut mean = DVector::zeros(dim);
    let mut norms_sq = Vec::with_capacity(m);
    let mut rows = Vec::with_capacity(m);
    let mut buf = DVector::zeros(dim);
    for _ in 0..m {
        fill_row(spec, &mut buf, rng);
        norms_sq.push(buf.norm_squared());
        mean += &buf;
        rows.push(buf.clone());
    }
    mean /= m as f64;

    let avg_dev_sq: f64 = rows.iter().map(|r| (r - &mean).norm_squared()).sum::<f64>() / m as f64;

    let norm_mean = norms_sq.iter().sum::<f64>() / m as f64;
    let norm_var = norms_sq
        .iter()
        .map(|v| (v - norm_mean).powi(2))
        .sum::<f64>()
        / (m as f64 - 1.0);

    // E||mu_hat||^2 = ||mu||^2 + tr(Sigma)/m; subtract the estimated bias.
    let mean_norm_sq_unbiased = (mean.norm_squared()
        - avg_dev_sq * (m as f64 / (m as f64 - 1.0)) / m as f64)
        .max(0.0);

    Ok(AssumptionDiagnostics {
        mean_ratio: mean_norm_sq_unbiased / avg_dev_sq,
        power_ratio: norm_var / (avg_dev_sq * avg_dev_sq),
        n: dim,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian_mixing(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng(seed);
        DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn centered_bernoulli_takes_two_values_with_right_frequencies() {
        let n = 10;
        let spec = EnsembleSpec::CenteredBernoulliMixed {
            n,
            p: 0.8,
            mixing: DMatrix::identity(n, n),
        };
        let draws = 10_000; // 1e5 entries
        let op = sample_operator(&spec, draws, &mut rng(11)).unwrap();
        let sigma = (0.8f64 * 0.2).sqrt();
        let hi = 0.2 / sigma;
        let lo = -0.8 / sigma;
        let mut hi_count = 0usize;
        let total = draws * n;
        for v in op.rows.iter() {
            if (v - hi).abs() < 1e-12 {
                hi_count += 1;
            } else {
                assert!((v - lo).abs() < 1e-12, "unexpected entry {v}");
            }
        }
        let p_hat = hi_count as f64 / total as f64;
        let tol = 4.0 * (0.8f64 * 0.2 / total as f64).sqrt();
        assert!((p_hat - 0.8).abs() <= tol, "p_hat = {p_hat}");
    }

    #[test]
    fn correlated_gaussian_covariance_matches_mmt() {
        let n = 8;
        let mixing = gaussian_mixing(n, 2);
        let target = &mixing * mixing.transpose();
        let spec = EnsembleSpec::GaussianCorrelated { n, mixing };
        let samples = 10_000;
        let mut r = rng(3);
        let (_, cov) = empirical_moments(&spec, samples, &mut r).unwrap();
        let scale = target.abs().max();
        let dev = (cov - target).abs().max();
        assert!(
            dev <= 5.0 * (1.0 / samples as f64).sqrt() * scale * 2.0,
            "cov deviation {dev} (scale {scale})"
        );
    }

    #[test]
    fn wigner_rows_are_symmetric_with_diagonal_variance_two() {
        let n = 6;
        let spec = EnsembleSpec::WignerSurrogate { n };
        let op = sample_operator(&spec, 10_000, &mut rng(5)).unwrap();
        let mut diag_vals = Vec::new();
        for i in 0..op.rows.nrows() {
            let row = op.rows.row(i);
            for p in 0..n {
                for q in (p + 1)..n {
                    assert_eq!(row[p * n + q], row[q * n + p]);
                }
                diag_vals.push(row[p * n + p] - 1.0); // remove the +I shift
            }
        }
        let mean = diag_vals.iter().sum::<f64>() / diag_vals.len() as f64;
        let var = diag_vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (diag_vals.len() as f64 - 1.0);
        assert!((var - 2.0).abs() <= 0.2, "diagonal variance {var}");
    }

    #[test]
    fn identical_specs_match_to_sampling_noise() {
        let spec = EnsembleSpec::GaussianIid { n: 12 };
        let dev = second_moment_match(&spec, &spec, 20_000, &mut rng(6)).unwrap();
        assert!(dev.mean_dev <= 4.0 * (1.0f64 / 20_000.0).sqrt() * 2.0);
        assert!(dev.cov_dev <= 5.0 * (2.0f64 / 20_000.0).sqrt() * 2.0);
    }

    #[test]
    fn quadratic_and_wigner_share_first_two_moments() {
        // E[vec(a a^T)] = E[vec(H + I)] = vec(I) analytically; the empirical
        // means must agree to Monte Carlo accuracy.
        let n = 4;
        let a = EnsembleSpec::QuadraticGaussian { n };
        let b = EnsembleSpec::WignerSurrogate { n };
        let samples = 100_000;
        let mut r = rng(8);
        let (mean_a, _) = empirical_moments(&a, samples, &mut r).unwrap();
        let (mean_b, _) = empirical_moments(&b, samples, &mut r).unwrap();
        let target = matrix_to_vec(&DMatrix::identity(n, n));
        // Worst per-entry sd is sqrt(3) (diagonal of a a^T has Var = 2, plus
        // the Wigner diagonal Var = 2); 4 sigma of the mean estimate.
        let tol = 4.0 * (3.0f64 / samples as f64).sqrt();
        assert!((&mean_a - &target).abs().max() <= tol);
        assert!((&mean_b - &target).abs().max() <= tol);
        assert!((mean_a - mean_b).abs().max() <= 2.0 * tol);
    }

    #[test]
    fn mixed_ensembles_with_same_mixing_share_covariance() {
        let n = 8;
        let mixing = gaussian_mixing(n, 20);
        let a = EnsembleSpec::CenteredBernoulliMixed { n, p: 0.8, mixing: mixing.clone() };
        let b = EnsembleSpec::CenteredChiSquareMixed { n, dof: 1.0, mixing: mixing.clone() };
        let samples = 40_000;
        let dev = second_moment_match(&a, &b, samples, &mut rng(21)).unwrap();
        let scale = (&mixing * mixing.transpose()).abs().max();
        // chi-square(1) has excess kurtosis 12, so covariance estimates are
        // noisier than Gaussian; allow a generous multiple.
        assert!(
            dev.cov_dev <= 12.0 * (1.0 / samples as f64).sqrt() * scale * 4.0,
            "cov deviation {} vs scale {scale}",
            dev.cov_dev
        );
    }

    #[test]
    fn gaussian_power_ratio_is_two_over_n() {
        let spec = EnsembleSpec::GaussianIid { n: 256 };
        let d = diagnose(&spec, 10_000, &mut rng(12)).unwrap();
        let expected = 2.0 / 256.0;
        assert!(
            (d.power_ratio - expected).abs() <= 0.2 * expected,
            "power_ratio {} vs {expected}",
            d.power_ratio
        );
    }

    #[test]
    fn gaussian_mean_ratio_is_consistent_with_zero() {
        let spec = EnsembleSpec::GaussianIid { n: 64 };
        let d = diagnose(&spec, 10_000, &mut rng(13)).unwrap();
        // sd of the debiased ||mu_hat||^2 estimator is sqrt(2n)/m; normalized
        // by E||a - mu||^2 = n.
        let stderr = (2.0f64 * 64.0).sqrt() / 10_000.0 / 64.0;
        assert!(d.mean_ratio <= 3.0 * stderr, "mean_ratio {}", d.mean_ratio);
    }

    #[test]
    fn wigner_mean_ratio_is_one_over_n_plus_one() {
        let n = 16;
        let spec = EnsembleSpec::WignerSurrogate { n };
        let d = diagnose(&spec, 10_000, &mut rng(14)).unwrap();
        let expected = 1.0 / (n as f64 + 1.0);
        assert!(
            (d.mean_ratio - expected).abs() <= 0.2 * expected,
            "mean_ratio {} vs {expected}",
            d.mean_ratio
        );
    }

    #[test]
    fn same_seed_gives_bit_identical_operator() {
        let mixing = gaussian_mixing(5, 30);
        let specs = [
            EnsembleSpec::GaussianIid { n: 5 },
            EnsembleSpec::GaussianCorrelated { n: 5, mixing: mixing.clone() },
            EnsembleSpec::CenteredBernoulliMixed { n: 5, p: 0.8, mixing: mixing.clone() },
            EnsembleSpec::CenteredChiSquareMixed { n: 5, dof: 1.0, mixing },
            EnsembleSpec::QuadraticGaussian { n: 5 },
            EnsembleSpec::WignerSurrogate { n: 5 },
        ];
        for spec in &specs {
            let a = sample_operator(spec, 7, &mut rng(31)).unwrap();
            let b = sample_operator(spec, 7, &mut rng(31)).unwrap();
            assert_eq!(a.rows, b.rows);
        }
    }

    #[test]
    fn quadratic_rows_reshape_symmetric() {
        for spec in [
            EnsembleSpec::QuadraticGaussian { n: 6 },
            EnsembleSpec::WignerSurrogate { n: 6 },
        ] {
            let op = sample_operator(&spec, 20, &mut rng(32)).unwrap();
            for i in 0..20 {
                let row = op.rows.row(i);
                for p in 0..6 {
                    for q in 0..6 {
                        assert_eq!(row[p * 6 + q], row[q * 6 + p]);
                    }
                }
            }
        }
    }

    #[test]
    fn moment_identity_for_fixed_probe_matrix() {
        // For unit-Frobenius symmetric X, both a^T X a and tr((H+I) X) have
        // mean tr(X) and variance 2.
        let n = 5;
        let mut r = rng(33);
        let mut x = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut r);
            v
        });
        x = (&x + x.transpose()) / 2.0;
        x /= x.norm();
        let trace_x = x.trace();
        let xv = matrix_to_vec(&x);

        let samples = 50_000;
        for spec in [
            EnsembleSpec::QuadraticGaussian { n },
            EnsembleSpec::WignerSurrogate { n },
        ] {
            let op = sample_operator(&spec, samples, &mut r).unwrap();
            let vals = &op.rows * &xv;
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (samples as f64 - 1.0);
            // Var of the sample mean is var/m; Var of the sample variance of
            // a ~chi-square-like variable is of order var^2 * kurtosis / m.
            let mean_tol = 3.0 * (2.0f64 / samples as f64).sqrt();
            let var_tol = 3.0 * 2.0 * (15.0f64 / samples as f64).sqrt();
            assert!((mean - trace_x).abs() <= mean_tol, "{spec:?}: mean {mean} vs {trace_x}");
            assert!((var - 2.0).abs() <= var_tol, "{spec:?}: var {var}");
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = EnsembleSpec::GaussianIid { n: 4 };
        let b = EnsembleSpec::GaussianIid { n: 5 };
        assert!(second_moment_match(&a, &b, 100, &mut rng(40)).is_err());
    }

    #[test]
    fn zero_rows_rejected() {
        assert!(sample_operator(&EnsembleSpec::GaussianIid { n: 4 }, 0, &mut rng(41)).is_err());
    }
}
