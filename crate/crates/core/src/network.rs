//! Reaction networks: stoichiometry, hazards and drift Jacobians.
//!
//! A network is a set of species and reactions. Each reaction carries a
//! hazard: mass-action kinetics keyed to a rate parameter, a
//! Gaussian-pulse time-varying rate, or an arbitrary registered closure.
//! Hazards are evaluated on real-valued states so the same network drives
//! the jump process, the diffusion approximation and the moment ODEs.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rate constants plus any observation parameters, kept jointly on the
/// natural and log scales. The log scale is the MCMC working
/// representation; `values = exp(log_values)` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: DVector<f64>,
    log_values: DVector<f64>,
}

impl ParamVector {
    /// Build from strictly positive natural-scale values.
    pub fn from_natural(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("parameters must be finite and positive"));
        }
        let values = DVector::from_row_slice(values);
        let log_values = values.map(f64::ln);
        Ok(ParamVector { values, log_values })
    }

    /// Build from finite log-scale values.
    pub fn from_log(log_values: &DVector<f64>) -> Result<Self> {
        if log_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log-parameters must be finite"));
        }
        let values = log_values.map(f64::exp);
        Ok(ParamVector {
            values,
            log_values: log_values.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Natural-scale value of parameter `i`.
    #[inline]
    pub fn natural(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn naturals(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn logs(&self) -> &DVector<f64> {
        &self.log_values
    }
}

/// A time-stamped system state. Jump-process states hold non-negative
/// integer counts (stored as f64); diffusion states are real-valued.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub x: DVector<f64>,
}

impl SystemState {
    pub fn new(t: f64, x: DVector<f64>) -> Self {
        SystemState { t, x }
    }
}

/// Hazard closure: (state, params, time) -> rate.
pub type HazardFn = dyn Fn(&DVector<f64>, &ParamVector, f64) -> f64 + Send + Sync;
/// Upper bound closure: (state, params, t0, t1) -> sup of the hazard over [t0, t1].
pub type HazardBoundFn = dyn Fn(&DVector<f64>, &ParamVector, f64, f64) -> f64 + Send + Sync;
/// State gradient closure: (state, params, time) -> d hazard / d state.
pub type HazardGradFn = dyn Fn(&DVector<f64>, &ParamVector, f64) -> DVector<f64> + Send + Sync;

/// Per-reaction hazard specification.
#[derive(Clone)]
pub enum Hazard {
    /// Mass-action kinetics: rate constant times the product of binomial
    /// coefficients of reactant multiplicities.
    MassAction { rate: usize },
    /// Time-varying rate `a * exp(-d (t - m)^2) + b`, state-independent.
    /// Fields are parameter indices.
    GaussianPulse {
        amplitude: usize,
        decay: usize,
        center: usize,
        baseline: usize,
    },
    /// Arbitrary registered hazard. `sup` must dominate the hazard over
    /// the queried interval for the fixed state (used by the thinning
    /// sampler); `grad` enables the analytic Jacobian when present.
    Custom {
        f: Arc<HazardFn>,
        sup: Arc<HazardBoundFn>,
        grad: Option<Arc<HazardGradFn>>,
    },
}

impl PartialEq for Hazard {
    /// Structural hazards compare by fields; custom closures only compare
    /// equal to themselves.
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Hazard::MassAction { rate: a }, Hazard::MassAction { rate: b }) => a == b,
            (
                Hazard::GaussianPulse {
                    amplitude: a1,
                    decay: d1,
                    center: c1,
                    baseline: b1,
                },
                Hazard::GaussianPulse {
                    amplitude: a2,
                    decay: d2,
                    center: c2,
                    baseline: b2,
                },
            ) => a1 == a2 && d1 == d2 && c1 == c2 && b1 == b2,
            (Hazard::Custom { f: fa, .. }, Hazard::Custom { f: fb, .. }) => Arc::ptr_eq(fa, fb),
            _ => false,
        }
    }
}

impl fmt::Debug for Hazard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hazard::MassAction { rate } => write!(f, "MassAction {{ rate: {rate} }}"),
            Hazard::GaussianPulse {
                amplitude,
                decay,
                center,
                baseline,
            } => write!(
                f,
                "GaussianPulse {{ amplitude: {amplitude}, decay: {decay}, center: {center}, baseline: {baseline} }}"
            ),
            Hazard::Custom { grad, .. } => {
                write!(f, "Custom {{ grad: {} }}", grad.is_some())
            }
        }
    }
}

/// One reaction: reactant/product multiplicities by species index plus a
/// hazard specification.
#[derive(Debug, Clone)]
pub struct Reaction {
    pub reactants: Vec<(usize, u32)>,
    pub products: Vec<(usize, u32)>,
    pub hazard: Hazard,
}

impl Reaction {
    pub fn mass_action(reactants: Vec<(usize, u32)>, products: Vec<(usize, u32)>, rate: usize) -> Self {
        Reaction {
            reactants,
            products,
            hazard: Hazard::MassAction { rate },
        }
    }
}

/// A reaction network over `u` species and `v` reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    param_names: Vec<String>,
    /// v x u reactant multiplicities.
    reactant_coeffs: DMatrix<u32>,
    /// v x u product multiplicities.
    product_coeffs: DMatrix<u32>,
    /// u x v stoichiometry, equal to (product - reactant) coefficients transposed.
    stoich: DMatrix<f64>,
    hazards: Vec<Hazard>,
}

impl ReactionNetwork {
    pub fn new(
        species: Vec<String>,
        param_names: Vec<String>,
        reactions: Vec<Reaction>,
    ) -> Result<Self> {
        let u = species.len();
        let v = reactions.len();
        if u == 0 || v == 0 {
            return Err(Error::invalid("network needs at least one species and one reaction"));
        }
        let mut p = DMatrix::<u32>::zeros(v, u);
        let mut q = DMatrix::<u32>::zeros(v, u);
        for (i, r) in reactions.iter().enumerate() {
            for &(j, coeff) in &r.reactants {
                if j >= u {
                    return Err(Error::invalid(format!("reaction {i}: species index {j} out of range")));
                }
                p[(i, j)] += coeff;
            }
            for &(j, coeff) in &r.products {
                if j >= u {
                    return Err(Error::invalid(format!("reaction {i}: species index {j} out of range")));
                }
                q[(i, j)] += coeff;
            }
            let max_param = match &r.hazard {
                Hazard::MassAction { rate } => *rate,
                Hazard::GaussianPulse {
                    amplitude,
                    decay,
                    center,
                    baseline,
                } => *amplitude.max(decay).max(center).max(baseline),
                Hazard::Custom { .. } => 0,
            };
            if max_param >= param_names.len() {
                return Err(Error::invalid(format!(
                    "reaction {i}: parameter index {max_param} out of range"
                )));
            }
        }
        // S = (Q - P)' entry-wise.
        let mut stoich = DMatrix::<f64>::zeros(u, v);
        for i in 0..v {
            for j in 0..u {
                stoich[(j, i)] = q[(i, j)] as f64 - p[(i, j)] as f64;
            }
        }
        let hazards = reactions.into_iter().map(|r| r.hazard).collect();
        Ok(ReactionNetwork {
            species,
            param_names,
            reactant_coeffs: p,
            product_coeffs: q,
            stoich,
            hazards,
        })
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn num_reactions(&self) -> usize {
        self.hazards.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn stoich(&self) -> &DMatrix<f64> {
        &self.stoich
    }

    pub fn reactant_coeffs(&self) -> &DMatrix<u32> {
        &self.reactant_coeffs
    }

    pub fn product_coeffs(&self) -> &DMatrix<u32> {
        &self.product_coeffs
    }

    pub fn hazard_kinds(&self) -> &[Hazard] {
        &self.hazards
    }

    /// True when every hazard is mass-action (no time dependence).
    pub fn is_time_homogeneous(&self) -> bool {
        self.hazards
            .iter()
            .all(|h| matches!(h, Hazard::MassAction { .. }))
    }

    /// Evaluate all hazards at state `x`, parameters `c` and time `t`.
    ///
    /// Negative state components are rejected; callers holding diffusion
    /// states must clamp them to zero first.
    pub fn hazards(&self, x: &DVector<f64>, c: &ParamVector, t: f64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.num_reactions());
        self.hazards_into(x, c, t, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`hazards`](Self::hazards) for hot loops.
    pub fn hazards_into(
        &self,
        x: &DVector<f64>,
        c: &ParamVector,
        t: f64,
        out: &mut DVector<f64>,
    ) -> Result<()> {
        debug_assert_eq!(x.len(), self.num_species());
        debug_assert_eq!(out.len(), self.num_reactions());
        for (j, v) in x.iter().enumerate() {
            if *v < 0.0 {
                return Err(Error::NegativeState { index: j, value: *v });
            }
        }
        for (i, hz) in self.hazards.iter().enumerate() {
            let h = match hz {
                Hazard::MassAction { rate } => {
                    let mut prod = c.natural(*rate);
                    for j in 0..self.num_species() {
                        let p = self.reactant_coeffs[(i, j)];
                        if p > 0 {
                            prod *= falling_binomial(x[j], p);
                        }
                        if prod == 0.0 {
                            break;
                        }
                    }
                    prod
                }
                Hazard::GaussianPulse {
                    amplitude,
                    decay,
                    center,
                    baseline,
                } => {
                    let d = t - c.natural(*center);
                    c.natural(*amplitude) * (-c.natural(*decay) * d * d).exp() + c.natural(*baseline)
                }
                Hazard::Custom { f, .. } => f(x, c, t),
            };
            if !h.is_finite() {
                return Err(Error::NonFiniteHazard { reaction: i, t });
            }
            out[i] = h;
        }
        Ok(())
    }

    /// Drift of the diffusion/moment approximations: stoichiometry times
    /// hazards.
    pub fn drift(&self, x: &DVector<f64>, c: &ParamVector, t: f64) -> Result<DVector<f64>> {
        Ok(&self.stoich * self.hazards(x, c, t)?)
    }

    /// Jacobian of the drift with respect to the state.
    ///
    /// Mass-action and Gaussian-pulse hazards (and custom hazards with a
    /// registered gradient) get the exact derivative; otherwise the whole
    /// matrix falls back to central finite differences of the drift with
    /// step `max(1e-6, 1e-6 |z_j|)`.
    pub fn jacobian(&self, z: &DVector<f64>, c: &ParamVector, t: f64) -> Result<DMatrix<f64>> {
        let u = self.num_species();
        let mut out = DMatrix::zeros(u, u);
        self.jacobian_into(z, c, t, &mut out)?;
        Ok(out)
    }

    pub fn jacobian_into(
        &self,
        z: &DVector<f64>,
        c: &ParamVector,
        t: f64,
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        if self.has_analytic_jacobian() {
            self.jacobian_analytic(z, c, t, out)
        } else {
            self.jacobian_fd(z, c, t, out)
        }
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.hazards.iter().all(|h| match h {
            Hazard::MassAction { .. } | Hazard::GaussianPulse { .. } => true,
            Hazard::Custom { grad, .. } => grad.is_some(),
        })
    }

    fn jacobian_analytic(
        &self,
        z: &DVector<f64>,
        c: &ParamVector,
        t: f64,
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        let u = self.num_species();
        let v = self.num_reactions();
        out.fill(0.0);
        // out = S * dh/dz, accumulated column by column.
        for i in 0..v {
            match &self.hazards[i] {
                Hazard::GaussianPulse { .. } => {} // state-independent
                Hazard::MassAction { rate } => {
                    for k in 0..u {
                        let p = self.reactant_coeffs[(i, k)];
                        if p == 0 {
                            continue;
                        }
                        let mut d = c.natural(*rate) * falling_binomial_derivative(z[k], p);
                        if d == 0.0 {
                            continue;
                        }
                        for j in 0..u {
                            if j != k {
                                let pj = self.reactant_coeffs[(i, j)];
                                if pj > 0 {
                                    d *= falling_binomial(z[j], pj);
                                }
                            }
                        }
                        for r in 0..u {
                            out[(r, k)] += self.stoich[(r, i)] * d;
                        }
                    }
                }
                Hazard::Custom { grad, .. } => {
                    let g = grad
                        .as_ref()
                        .expect("has_analytic_jacobian checked")(z, c, t);
                    for k in 0..u {
                        if g[k] != 0.0 {
                            for r in 0..u {
                                out[(r, k)] += self.stoich[(r, i)] * g[k];
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn jacobian_fd(
        &self,
        z: &DVector<f64>,
        c: &ParamVector,
        t: f64,
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        let u = self.num_species();
        let mut zp = z.clone();
        let clamp = |v: &DVector<f64>| v.map(|x| x.max(0.0));
        for j in 0..u {
            let step = 1e-6f64.max(1e-6 * z[j].abs());
            zp[j] = z[j] + step;
            let fp = self.drift(&clamp(&zp), c, t)?;
            zp[j] = z[j] - step;
            let fm = self.drift(&clamp(&zp), c, t)?;
            zp[j] = z[j];
            for r in 0..u {
                out[(r, j)] = (fp[r] - fm[r]) / (2.0 * step);
            }
        }
        Ok(())
    }
}

/// Total hazard: the rate of the next-event exponential clock.
pub fn total_hazard(h: &DVector<f64>) -> f64 {
    h.sum()
}

/// Generalized binomial coefficient choose(x, p) written as a falling
/// factorial over p!. Clamped at zero so fractional diffusion states can
/// never produce a negative hazard.
#[inline]
fn falling_binomial(x: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => x.max(0.0),
        _ => {
            let mut prod = 1.0;
            for k in 0..p {
                prod *= x - k as f64;
            }
            if prod <= 0.0 {
                0.0
            } else {
                prod / factorial(p)
            }
        }
    }
}

/// d/dx of [`falling_binomial`]; zero inside the clamped region.
#[inline]
fn falling_binomial_derivative(x: f64, p: u32) -> f64 {
    match p {
        0 => 0.0,
        1 => {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => {
            let mut prod = 1.0;
            for k in 0..p {
                prod *= x - k as f64;
            }
            if prod <= 0.0 {
                return 0.0;
            }
            let mut sum = 0.0;
            for k in 0..p {
                sum += prod / (x - k as f64);
            }
            sum / factorial(p)
        }
    }
}

#[inline]
fn factorial(p: u32) -> f64 {
    (1..=p).map(|k| k as f64).product()
}
