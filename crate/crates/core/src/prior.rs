//! Prior specifications for the (log-scale) parameter chain.
//!
//! Priors stated on the natural scale (Gamma, Exponential) pick up the
//! Jacobian factor `c` when evaluated in the log parametrisation; the
//! log-uniform prior is stated directly on log c and needs none. Getting
//! this bookkeeping wrong silently tilts the posterior, so it is pinned
//! by a conjugate closed-form test in the mcmc module.

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Prior for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamPrior {
    /// log c ~ Uniform(lo, hi).
    LogUniform { lo: f64, hi: f64 },
    /// c ~ Gamma(shape, rate) on the natural scale (mean shape/rate).
    Gamma { shape: f64, rate: f64 },
    /// c ~ Exponential(rate) on the natural scale (mean 1/rate).
    Exponential { rate: f64 },
}

impl ParamPrior {
    /// Log density in the log-c parametrisation (Jacobian included).
    pub fn log_density(&self, theta: f64) -> f64 {
        match self {
            ParamPrior::LogUniform { lo, hi } => {
                if theta > *lo && theta < *hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ParamPrior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(*shape) + shape * theta - rate * theta.exp()
            }
            ParamPrior::Exponential { rate } => rate.ln() + theta - rate * theta.exp(),
        }
    }

    /// A representative natural-scale value, used for default chain
    /// initialisation when no truth is available.
    pub fn typical(&self) -> f64 {
        match self {
            ParamPrior::LogUniform { lo, hi } => (0.5 * (lo + hi)).exp(),
            ParamPrior::Gamma { shape, rate } => shape / rate,
            ParamPrior::Exponential { rate } => 1.0 / rate,
        }
    }
}

/// Independent priors, one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    priors: Vec<ParamPrior>,
}

impl PriorSpec {
    pub fn new(priors: Vec<ParamPrior>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::invalid("prior needs at least one parameter"));
        }
        Ok(PriorSpec { priors })
    }

    pub fn dim(&self) -> usize {
        self.priors.len()
    }

    pub fn components(&self) -> &[ParamPrior] {
        &self.priors
    }

    /// Joint log density at the log-scale parameter vector.
    pub fn log_density(&self, log_c: &DVector<f64>) -> f64 {
        debug_assert_eq!(log_c.len(), self.priors.len());
        let mut total = 0.0;
        for (p, &theta) in self.priors.iter().zip(log_c.iter()) {
            let lp = p.log_density(theta);
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += lp;
        }
        total
    }

    /// Natural-scale typical values, one per parameter.
    pub fn typical(&self) -> Vec<f64> {
        self.priors.iter().map(ParamPrior::typical).collect()
    }
}
