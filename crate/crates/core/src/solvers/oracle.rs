//! Exact basis-pursuit oracle for small instances.
//!
//! min ||x||_1 s.t. A x = y splits into the linear program
//! min 1^T(u + w) s.t. [A, -A][u; w] = y, u, w >= 0, whose optimum is
//! attained at a basic solution with at most m nonzero coordinates of x.
//! Enumerating every size-m column subset of A and solving the square
//! system therefore visits an optimal point; the minimum objective over
//! all nonsingular subsets is the exact optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub struct OracleResult {
    pub objective: f64,
    pub minimizer: DVector<f64>,
}

pub fn solve_oracle_l1(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<OracleResult> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > 10 {
        return Err(Error::InvalidParameter(format!(
            "oracle limited to n <= 10, got n = {n}"
        )));
    }
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!(
            "oracle needs 1 <= m < n, got m = {m}, n = {n}"
        )));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "y has length {}, expected {m}",
            y.len()
        )));
    }

    let mut best: Option<OracleResult> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        if let Some(candidate) = try_subset(a, y, &subset) {
            let replace = match &best {
                None => true,
                Some(b) => candidate.objective < b.objective,
            };
            if replace {
                best = Some(candidate);
            }
        }
        if !advance_combination(&mut subset, n) {
            break;
        }
    }
    best.ok_or_else(|| {
        Error::NumericalFailure("degenerate A: no full-rank m-column subset".into())
    })
}

fn try_subset(a: &DMatrix<f64>, y: &DVector<f64>, subset: &[usize]) -> Option<OracleResult> {
    let m = a.nrows();
    let sub = DMatrix::from_fn(m, m, |i, j| a[(i, subset[j])]);
    let lu = sub.clone().full_piv_lu();
    let xs = lu.solve(y)?;
    if (sub * &xs - y).norm() > 1e-9 * (1.0 + y.norm()) {
        return None;
    }
    let mut x = DVector::zeros(a.ncols());
    for (j, &col) in subset.iter().enumerate() {
        x[col] = xs[j];
    }
    Some(OracleResult {
        objective: xs.iter().map(|v| v.abs()).sum(),
        minimizer: x,
    })
}

/// Advances to the next lexicographic m-combination of 0..n; false at the end.
fn advance_combination(subset: &mut [usize], n: usize) -> bool {
    let m = subset.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        if subset[i] < n - (m - i) {
            subset[i] += 1;
            for j in (i + 1)..m {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn analytic_line_instance() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![2.0]);
        let r = solve_oracle_l1(&a, &y).unwrap();
        assert!((r.objective - 1.0).abs() <= 1e-12);
        assert!((r.minimizer[0]).abs() <= 1e-12);
        assert!((r.minimizer[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn recovery_regime_matches_sparse_truth_norm() {
        // 1-sparse truth with m = 4 Gaussian measurements in R^6 sits in
        // the recovery regime, so the l1 optimum is the truth itself on
        // most instances (exact recovery still fails occasionally at this
        // tiny size). The truth is always feasible, so the oracle can
        // never exceed its norm.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut exact = 0;
        for _ in 0..10 {
            let a = DMatrix::from_fn(4, 6, |_, _| StandardNormal.sample(&mut rng));
            let mut x0 = DVector::zeros(6);
            x0[2] = 1.5;
            let y = &a * &x0;
            let r = solve_oracle_l1(&a, &y).unwrap();
            assert!(r.objective <= 1.5 + 1e-9, "objective {}", r.objective);
            if (r.objective - 1.5).abs() <= 1e-9 {
                exact += 1;
            }
        }
        assert!(exact >= 8, "only {exact}/10 instances recovered exactly");
    }

    #[test]
    fn oracle_never_exceeds_a_feasible_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let n = 8;
            let m = 5;
            let a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
            let x_feas = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let y = &a * &x_feas;
            let r = solve_oracle_l1(&a, &y).unwrap();
            let feas_obj: f64 = x_feas.iter().map(|v| v.abs()).sum();
            assert!(r.objective <= feas_obj + 1e-9);
            assert!((&a * &r.minimizer - &y).norm() <= 1e-8 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn parameter_limits_enforced() {
        let a = DMatrix::<f64>::zeros(4, 12);
        assert!(solve_oracle_l1(&a, &DVector::zeros(4)).is_err());
        let a = DMatrix::<f64>::zeros(6, 6);
        assert!(solve_oracle_l1(&a, &DVector::zeros(6)).is_err());
    }

    #[test]
    fn degenerate_operator_reports_failure() {
        let a = DMatrix::<f64>::zeros(2, 4);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            solve_oracle_l1(&a, &y),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn combination_iterator_visits_all_subsets() {
        let mut subset = vec![0usize, 1];
        let mut count = 1;
        while advance_combination(&mut subset, 5) {
            count += 1;
        }
        assert_eq!(count, 10); // C(5,2)
    }
}
