//! Small numerical helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Jitter ladder used when factorizing covariance matrices that may be
/// singular (zero species counts, exactly observed components).
pub const COV_JITTER_LADDER: [f64; 3] = [0.0, 1e-10, 1e-8];

/// log(sum(exp(x))) with the max-shift trick; returns -inf for an empty
/// slice or when every entry is -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Cholesky with escalating diagonal jitter. Returns the factorization of
/// `m + eps*I` for the first `eps` in `ladder` that succeeds.
pub fn cholesky_with_jitter(
    m: &DMatrix<f64>,
    ladder: &[f64],
) -> Option<Cholesky<f64, Dyn>> {
    for &eps in ladder {
        let mut a = m.clone();
        if eps > 0.0 {
            for i in 0..a.nrows() {
                a[(i, i)] += eps;
            }
        }
        if let Some(chol) = Cholesky::new(a) {
            return Some(chol);
        }
    }
    None
}

/// Log density of N(mean, cov) at y, with jittered factorization.
/// Returns None when cov is not positive definite after the ladder.
pub fn log_mvn_density(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Option<f64> {
    let p = y.len();
    debug_assert_eq!(mean.len(), p);
    debug_assert_eq!(cov.nrows(), p);
    let chol = cholesky_with_jitter(cov, &COV_JITTER_LADDER)?;
    let diff = y - mean;
    // Solve L w = diff; quadratic form is |w|^2.
    let w = chol.l_dirty().solve_lower_triangular(&diff)?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    Some(-0.5 * (p as f64 * LN_2PI + log_det + w.norm_squared()))
}

/// Replace `m` by its symmetric part (m + m')/2.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Sample mean and (unbiased) sample variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_direct() {
        let xs = [-1.0, 0.5, 2.0];
        let direct: f64 = xs.iter().copied().map(f64::exp).sum::<f64>();
        assert_relative_eq!(logsumexp(&xs), direct.ln(), epsilon = 1e-12);
    }

    #[test]
    fn logsumexp_all_neg_inf() {
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 4]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn mvn_scalar_matches_formula() {
        let y = DVector::from_vec(vec![150.0]);
        let mean = DVector::from_vec(vec![150.0]);
        let cov = DMatrix::from_vec(1, 1, vec![100.0]);
        let got = log_mvn_density(&y, &mean, &cov).unwrap();
        let want = -(10.0f64.ln() + 0.5 * LN_2PI);
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn singular_cov_rescued_by_jitter() {
        let y = DVector::from_vec(vec![0.0, 0.0]);
        let mean = y.clone();
        let cov = DMatrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        assert!(log_mvn_density(&y, &mean, &cov).is_some());
    }
}
