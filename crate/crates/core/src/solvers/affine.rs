//! Exact projection onto the measurement constraint set {x : A x = y}.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Projector onto {x : A x = y}, with the Cholesky factor of A A^T cached.
///
/// If A A^T is numerically rank-deficient the factorization is retried once
/// with a ridge of 1e-10 * trace(A A^T) / m, and the projector is flagged.
pub struct AffineProjector {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    gram_factor: Cholesky<f64, Dyn>,
    pub ridge_used: bool,
}

impl AffineProjector {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let m = a.nrows();
        if y.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "y has length {} but A has {m} rows",
                y.len()
            )));
        }
        let gram = &a * a.transpose();
        let (gram_factor, ridge_used) = match Cholesky::new(gram.clone()) {
            Some(c) => (c, false),
            None => {
                let ridge = 1e-10 * gram.trace() / m as f64;
                let ridged = gram + DMatrix::from_diagonal_element(m, m, ridge);
                match Cholesky::new(ridged) {
                    Some(c) => (c, true),
                    None => {
                        return Err(Error::NumericalFailure(
                            "Cholesky of A A^T failed even with ridge".into(),
                        ))
                    }
                }
            }
        };
        Ok(AffineProjector {
            a,
            y,
            gram_factor,
            ridge_used,
        })
    }

    /// p = v - A^T (A A^T)^{-1} (A v - y).
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        let mut work = DVector::zeros(self.a.nrows());
        self.project_inplace(&mut out, &mut work);
        out
    }

    /// In-place projection; `work` must have length m.
    pub fn project_inplace(&self, v: &mut DVector<f64>, work: &mut DVector<f64>) {
        work.gemv(1.0, &self.a, v, 0.0);
        *work -= &self.y;
        self.gram_factor.solve_mut(work);
        v.gemv_tr(-1.0, &self.a, work, 1.0);
    }

    /// ||A v - y|| relative to max(1, ||y||).
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (&self.a * v - &self.y).norm() / self.y.norm().max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn analytic_projection_onto_a_line() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![0.0]);
        let p = AffineProjector::new(a, y).unwrap();
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let got = p.project(&v);
        assert!((got[0] - 0.5).abs() <= 1e-12);
        assert!((got[1] + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(4, 10, |_, _| StandardNormal.sample(&mut rng));
        let x0 = DVector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
        let y = &a * &x0;
        let p = AffineProjector::new(a, y).unwrap();
        let got = p.project(&x0);
        assert!((got - &x0).norm() <= 1e-10 * x0.norm());
    }

    #[test]
    fn projection_satisfies_constraints_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let a = DMatrix::from_fn(6, 20, |_, _| StandardNormal.sample(&mut rng));
            let x0 = DVector::from_fn(20, |_, _| StandardNormal.sample(&mut rng));
            let y = &a * &x0;
            let v = DVector::from_fn(20, |_, _| StandardNormal.sample(&mut rng));
            let proj = AffineProjector::new(a.clone(), y.clone()).unwrap();
            let p = proj.project(&v);
            assert!((&a * &p - &y).norm() <= 1e-8 * y.norm().max(1.0));

            // (v - p) must lie in range(A^T): solve the least-squares system
            // A^T w = v - p and check the residual vanishes.
            let d = &v - &p;
            let gram = &a * a.transpose();
            let rhs = &a * &d;
            let w = Cholesky::new(gram).unwrap().solve(&rhs);
            assert!((a.transpose() * w - &d).norm() <= 1e-8 * d.norm().max(1.0));

            // Idempotence.
            let pp = proj.project(&p);
            assert!((&pp - &p).norm() <= 1e-10 * p.norm().max(1.0));
        }
    }

    #[test]
    fn rank_deficient_gram_takes_ridge_path() {
        // Duplicate rows make A A^T singular.
        let mut a = DMatrix::zeros(2, 4);
        a.row_mut(0).copy_from(&DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]).row(0));
        a.row_mut(1).copy_from(&DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]).row(0));
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let p = AffineProjector::new(a, y).unwrap();
        assert!(p.ridge_used);
        let v = DVector::zeros(4);
        let got = p.project(&v);
        assert!(p.residual(&got) <= 1e-6);
    }
}
