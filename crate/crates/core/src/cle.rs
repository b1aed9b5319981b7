//! Euler–Maruyama simulation of the chemical Langevin equation.
//!
//! One step advances `x` by `S h dt + L sqrt(dt) eta` where `L L' = S
//! diag{h} S'`. Hazards are evaluated at the state clamped to the
//! positive orthant, but the state itself is never clamped: zeroing the
//! hazards at negative abundances is enough to keep the scheme finite
//! while the drift pulls excursions back.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::network::{ParamVector, ReactionNetwork};
use crate::stats::cholesky_with_jitter;

/// A real-valued diffusion state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub t: f64,
    pub x: DVector<f64>,
}

impl DiffusionState {
    pub fn new(t: f64, x: DVector<f64>) -> Self {
        DiffusionState { t, x }
    }
}

/// The diffusion matrix is singular whenever a hazard vanishes (e.g. a
/// species count at zero), so factorization escalates through this jitter
/// ladder before giving up.
const EM_JITTER_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// One Euler–Maruyama step of length `dt` driven by the supplied
/// standard-normal vector.
pub fn em_step(
    net: &ReactionNetwork,
    s: &DiffusionState,
    c: &ParamVector,
    dt: f64,
    noise: &DVector<f64>,
) -> Result<DiffusionState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("em_step: dt must be positive"));
    }
    let u = net.num_species();
    debug_assert_eq!(noise.len(), u);
    let clamped = s.x.map(|v| v.max(0.0));
    let h = net.hazards(&clamped, c, s.t)?;
    // h >= 0 certifies that S diag{h} S' is positive semi-definite.
    debug_assert!(h.iter().all(|v| *v >= 0.0));
    if h.iter().all(|v| *v == 0.0) {
        // Drift and diffusion both vanish; do not let jitter inject noise.
        return Ok(DiffusionState::new(s.t + dt, s.x.clone()));
    }

    let stoich = net.stoich();
    let mut diff = DMatrix::<f64>::zeros(u, u);
    for (i, hi) in h.iter().enumerate() {
        if *hi == 0.0 {
            continue;
        }
        for r in 0..u {
            let sr = stoich[(r, i)];
            if sr == 0.0 {
                continue;
            }
            for q in r..u {
                diff[(r, q)] += hi * sr * stoich[(q, i)];
            }
        }
    }
    for r in 0..u {
        for q in (r + 1)..u {
            diff[(q, r)] = diff[(r, q)];
        }
    }

    let chol = cholesky_with_jitter(&diff, &EM_JITTER_LADDER)
        .ok_or(Error::CholeskyFailed { context: "em_step diffusion matrix" })?;

    let mut x = s.x.clone();
    x.axpy(dt, &(stoich * &h), 1.0);
    x.axpy(dt.sqrt(), &(chol.l() * noise), 1.0);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: s.t + dt });
    }
    Ok(DiffusionState::new(s.t + dt, x))
}

/// Number and length of the equal substeps covering `[t0, t1]` with step
/// at most `dt_max`.
pub fn substeps(t0: f64, t1: f64, dt_max: f64) -> (usize, f64) {
    let span = t1 - t0;
    let n = (span / dt_max).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

/// Simulate the CLE over `[x0.t, t1]` with fresh Gaussian increments.
pub fn cle_simulate(
    net: &ReactionNetwork,
    x0: &DiffusionState,
    c: &ParamVector,
    t1: f64,
    dt_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DiffusionState> {
    if !(t1 > x0.t) {
        return Err(Error::invalid("cle_simulate: t1 must exceed the initial time"));
    }
    if !(dt_max > 0.0) {
        return Err(Error::invalid("cle_simulate: dt_max must be positive"));
    }
    let u = net.num_species();
    let (n, dt) = substeps(x0.t, t1, dt_max);
    let mut state = x0.clone();
    let mut noise = DVector::zeros(u);
    for k in 0..n {
        for e in noise.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        state = em_step(net, &state, c, dt, &noise)?;
        // Land exactly on the grid regardless of rounding.
        state.t = x0.t + (k + 1) as f64 * dt;
    }
    state.t = t1;
    Ok(state)
}
