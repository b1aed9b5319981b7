//! Shared oracles for the validation and acceptance suites.
//!
//! Everything here is computed by routes independent of the library
//! implementation: truncated-generator matrix exponentials
//! (uniformization), matrix-exponential propagation of linear moment
//! systems and textbook Kalman updates.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Generator of the immigration-death chain on the truncated state space
/// {0, ..., m}: birth at rate `kappa`, death at rate `gamma * x`.
pub fn imm_death_generator(kappa: f64, gamma: f64, m: usize) -> DMatrix<f64> {
    let n = m + 1;
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        let birth = if i < m { kappa } else { 0.0 };
        let death = gamma * i as f64;
        if i < m {
            q[(i, i + 1)] = birth;
        }
        if i > 0 {
            q[(i, i - 1)] = death;
        }
        q[(i, i)] = -(birth + death);
    }
    q
}

/// Transition matrix exp(Q dt) by uniformization: entry (i, j) is the
/// probability of moving from state i to state j over dt.
pub fn transition_matrix(q: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
    let n = q.nrows();
    let lambda = (0..n).map(|i| -q[(i, i)]).fold(0.0, f64::max).max(1e-12);
    let p = DMatrix::identity(n, n) + q / lambda;
    // Truncate the Poisson series well past the bulk.
    let mean = lambda * dt;
    let kmax = (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize;
    let mut term = DMatrix::identity(n, n);
    let mut total = DMatrix::zeros(n, n);
    let mut log_weight = -mean; // log Poisson(k = 0)
    for k in 0..=kmax {
        if k > 0 {
            term = &term * &p;
            log_weight += (mean / k as f64).ln();
        }
        total += &term * log_weight.exp();
    }
    total
}

/// Marginal distribution of the truncated chain at time `t` starting
/// from a point mass at `x0`.
pub fn imm_death_distribution(kappa: f64, gamma: f64, x0: usize, t: f64, m: usize) -> DVector<f64> {
    let q = imm_death_generator(kappa, gamma, m);
    let tr = transition_matrix(&q, t);
    tr.row(x0).transpose().clone_owned()
}

/// Exact (natural-scale) marginal likelihood of Gaussian observations of
/// the truncated immigration-death chain with known initial state:
/// forward algorithm with exp(Q) transition and N(x, sigma^2) emissions.
/// Observation times must be unit-spaced starting at the initial time.
pub fn imm_death_exact_likelihood(
    kappa: f64,
    gamma: f64,
    sigma: f64,
    x1: usize,
    observations: &[f64],
    m: usize,
) -> f64 {
    let n = m + 1;
    let q = imm_death_generator(kappa, gamma, m);
    let tr = transition_matrix(&q, 1.0);
    let emission = |y: f64, x: usize| -> f64 {
        let d = y - x as f64;
        (-0.5 * d * d / (sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut alpha = DVector::zeros(n);
    alpha[x1] = emission(observations[0], x1);
    for &y in &observations[1..] {
        let mut next = tr.transpose() * &alpha;
        for x in 0..n {
            next[x] *= emission(y, x);
        }
        alpha = next;
    }
    alpha.sum()
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic with the usual
/// small-sample correction).
pub fn ks2_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for k in 1..101 {
        p += 2.0 * (-1.0f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Independent linear-Gaussian filtering oracle for the two-species
/// gene-expression system with a constant transcription rate.
///
/// With constant transcription `kr` the moment equations are a linear
/// constant-coefficient system in (z1, z2, V11, V12, V22, 1), so each
/// inter-observation propagation is one matrix exponential. Observation:
/// y = z2 + noise with variance sigma^2; the filter restarts the moments
/// at the posterior after every update, mirroring the model being tested
/// but through an entirely different numerical route.
pub struct GeneLinearOracle {
    pub gamma_r: f64,
    pub gamma_p: f64,
    pub kappa_p: f64,
    /// Constant transcription rate.
    pub kr: f64,
    pub sigma: f64,
}

impl GeneLinearOracle {
    fn system_matrix(&self) -> DMatrix<f64> {
        let (gr, gp, kp, kr) = (self.gamma_r, self.gamma_p, self.kappa_p, self.kr);
        // State: (z1, z2, V11, V12, V22, 1).
        DMatrix::from_row_slice(
            6,
            6,
            &[
                -gr, 0.0, 0.0, 0.0, 0.0, kr, //
                kp, -gp, 0.0, 0.0, 0.0, 0.0, //
                gr, 0.0, -2.0 * gr, 0.0, 0.0, kr, //
                0.0, 0.0, kp, -(gr + gp), 0.0, 0.0, //
                kp, gp, 0.0, 2.0 * kp, -2.0 * gp, 0.0, //
                0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            ],
        )
    }

    /// Log marginal likelihood of protein observations on a regular grid
    /// with spacing `dt`, starting from the known state (r1, p1).
    pub fn log_marginal(&self, r1: f64, p1: f64, dt: f64, ys: &[f64]) -> f64 {
        let propagator = (self.system_matrix() * dt).exp();
        let ln_norm = |y: f64, mean: f64, var: f64| -> f64 {
            -0.5 * ((y - mean) * (y - mean) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
        };

        // Known initial state: point mass.
        let mut a = [r1, p1];
        let mut cov = [0.0, 0.0, 0.0]; // V11, V12, V22
        let s2 = self.sigma * self.sigma;
        let mut total = ln_norm(ys[0], a[1], s2);

        for &y in &ys[1..] {
            // Restart at the posterior and propagate exactly.
            let state = DVector::from_vec(vec![a[0], a[1], cov[0], cov[1], cov[2], 1.0]);
            let out = &propagator * state;
            let (z1, z2, v11, v12, v22) = (out[0], out[1], out[2], out[3], out[4]);
            let fvar = v22 + s2;
            total += ln_norm(y, z2, fvar);
            // Kalman update with G' = (0, 1).
            let k1 = v12 / fvar;
            let k2 = v22 / fvar;
            let innov = y - z2;
            a = [z1 + k1 * innov, z2 + k2 * innov];
            cov = [
                v11 - k1 * v12,
                v12 - k1 * v22,
                v22 - k2 * v22,
            ];
        }
        total
    }
}
