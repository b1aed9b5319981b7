//! Observation models and observed datasets.
//!
//! Three regimes cover the built-in experiments: linear-Gaussian
//! observation of `G'x` with additive noise, Poisson counts with mean
//! equal to selected components of the state, and exact (noise-free)
//! observation of `G'x`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::network::ParamVector;
use crate::stats::{cholesky_with_jitter, log_mvn_density, COV_JITTER_LADDER};

/// States within this distance of an integer observation count as equal
/// under exact observation.
const EXACT_MATCH_TOL: f64 = 1e-9;

/// Variance floor for the Gaussian substitution of Poisson observations,
/// so a deterministic path at zero cannot produce a zero forecast
/// variance.
pub const POISSON_VARIANCE_FLOOR: f64 = 1e-6;

/// Where the Gaussian observation covariance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    /// Fixed positive-definite covariance matrix.
    Fixed(DMatrix<f64>),
    /// Isotropic `sigma^2 I` with `sigma` read from the parameter vector
    /// at the given index (an inferred observation parameter).
    ParamStdDev(usize),
}

/// Observation regime.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationModel {
    /// `y = G'x + eps`, `eps ~ N(0, Sigma)`. `g` is u x p.
    LinearGaussian { g: DMatrix<f64>, noise: NoiseSpec },
    /// Independent Poisson counts with means given by the listed state
    /// components.
    Poisson { observed: Vec<usize> },
    /// `y = G'x` exactly (zero measurement error).
    Exact { g: DMatrix<f64> },
}

impl ObservationModel {
    pub fn linear_gaussian(g: DMatrix<f64>, noise: NoiseSpec) -> Result<Self> {
        validate_g(&g)?;
        if let NoiseSpec::Fixed(sigma) = &noise {
            if sigma.nrows() != g.ncols() || sigma.ncols() != g.ncols() {
                return Err(Error::invalid("noise covariance must be p x p"));
            }
        }
        Ok(ObservationModel::LinearGaussian { g, noise })
    }

    pub fn poisson(observed: Vec<usize>) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::invalid("poisson observation needs at least one component"));
        }
        let mut sorted = observed.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != observed.len() {
            return Err(Error::invalid("poisson observed components must be distinct"));
        }
        Ok(ObservationModel::Poisson { observed })
    }

    pub fn exact(g: DMatrix<f64>) -> Result<Self> {
        validate_g(&g)?;
        Ok(ObservationModel::Exact { g })
    }

    /// Number of observed components.
    pub fn obs_dim(&self) -> usize {
        match self {
            ObservationModel::LinearGaussian { g, .. } | ObservationModel::Exact { g } => g.ncols(),
            ObservationModel::Poisson { observed } => observed.len(),
        }
    }

    /// The u x p selection/weighting matrix. For Poisson observations
    /// this is the 0/1 selector of the observed components.
    pub fn g_matrix(&self, num_species: usize) -> DMatrix<f64> {
        match self {
            ObservationModel::LinearGaussian { g, .. } | ObservationModel::Exact { g } => g.clone(),
            ObservationModel::Poisson { observed } => {
                let mut g = DMatrix::zeros(num_species, observed.len());
                for (col, &j) in observed.iter().enumerate() {
                    g[(j, col)] = 1.0;
                }
                g
            }
        }
    }

    /// Effective observation covariance used by the Gaussian filter.
    /// For Poisson observations this is the diagonal substitution built
    /// from the deterministic path `z`.
    pub fn noise_cov(&self, c: &ParamVector, z: &DVector<f64>) -> DMatrix<f64> {
        match self {
            ObservationModel::LinearGaussian { noise, .. } => match noise {
                NoiseSpec::Fixed(sigma) => sigma.clone(),
                NoiseSpec::ParamStdDev(idx) => {
                    let s = c.natural(*idx);
                    DMatrix::identity(self.obs_dim(), self.obs_dim()) * (s * s)
                }
            },
            ObservationModel::Poisson { observed } => {
                let p = observed.len();
                let mut sigma = DMatrix::zeros(p, p);
                for (col, &j) in observed.iter().enumerate() {
                    sigma[(col, col)] = z[j].max(POISSON_VARIANCE_FLOOR);
                }
                sigma
            }
            ObservationModel::Exact { .. } => {
                DMatrix::zeros(self.obs_dim(), self.obs_dim())
            }
        }
    }

    /// Exact log density/mass of an observation given the latent state.
    /// The exact regime returns 0 on a match and -inf otherwise.
    pub fn log_density(&self, y: &DVector<f64>, x: &DVector<f64>, c: &ParamVector) -> f64 {
        match self {
            ObservationModel::LinearGaussian { g, .. } => {
                let mean = g.transpose() * x;
                let sigma = self.noise_cov(c, x);
                log_mvn_density(y, &mean, &sigma).unwrap_or(f64::NEG_INFINITY)
            }
            ObservationModel::Poisson { observed } => {
                let mut total = 0.0;
                for (col, &j) in observed.iter().enumerate() {
                    // Diffusion states may be slightly negative; a Poisson
                    // mean is clamped at zero.
                    let rate = x[j].max(0.0);
                    let k = y[col];
                    debug_assert!(k >= 0.0 && k.fract() == 0.0, "poisson data must be counts");
                    total += if rate == 0.0 {
                        if k == 0.0 {
                            0.0
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        k * rate.ln() - rate - ln_gamma(k + 1.0)
                    };
                }
                total
            }
            ObservationModel::Exact { g } => {
                let proj = g.transpose() * x;
                let matches = proj
                    .iter()
                    .zip(y.iter())
                    .all(|(a, b)| (a - b).abs() <= EXACT_MATCH_TOL);
                if matches {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Draw an observation of the state `x` (used to synthesize data).
    pub fn sample(&self, x: &DVector<f64>, c: &ParamVector, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            ObservationModel::LinearGaussian { g, .. } => {
                let mean = g.transpose() * x;
                let sigma = self.noise_cov(c, x);
                let chol = cholesky_with_jitter(&sigma, &COV_JITTER_LADDER)
                    .expect("observation covariance must be PSD");
                let eta = DVector::from_fn(mean.len(), |_, _| rng.sample(StandardNormal));
                mean + chol.l() * eta
            }
            ObservationModel::Poisson { observed } => DVector::from_iterator(
                observed.len(),
                observed.iter().map(|&j| {
                    let rate = x[j].max(0.0);
                    if rate == 0.0 {
                        0.0
                    } else {
                        rand_distr::Poisson::new(rate).unwrap().sample(rng)
                    }
                }),
            ),
            ObservationModel::Exact { g } => g.transpose() * x,
        }
    }
}

fn validate_g(g: &DMatrix<f64>) -> Result<()> {
    let (u, p) = (g.nrows(), g.ncols());
    if p == 0 || p > u {
        return Err(Error::invalid("observation matrix must have 1 <= p <= u columns"));
    }
    if g.clone().svd(false, false).rank(1e-10) < p {
        return Err(Error::invalid("observation matrix must have full column rank"));
    }
    Ok(())
}

use rand_distr::Distribution;

/// A regular grid of observations. The initial (known) state sits at
/// `times[0]` and `observations[0]` is the observation of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    pub observations: Vec<DVector<f64>>,
}

impl Dataset {
    pub fn new(times: Vec<f64>, observations: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != observations.len() {
            return Err(Error::invalid("dataset needs matching, non-empty times and observations"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("dataset times must be strictly increasing"));
        }
        let p = observations[0].len();
        if observations.iter().any(|y| y.len() != p) {
            return Err(Error::invalid("observations must share one dimension"));
        }
        Ok(Dataset {
            times,
            observations,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Validate that all entries are non-negative integers (Poisson data).
    pub fn check_counts(&self) -> Result<()> {
        for (k, y) in self.observations.iter().enumerate() {
            if y.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                return Err(Error::invalid(format!(
                    "observation {k} is not a non-negative integer count"
                )));
            }
        }
        Ok(())
    }
}
