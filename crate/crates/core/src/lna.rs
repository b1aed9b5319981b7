//! Linear noise approximation: moment ODEs and the tractable marginal
//! likelihood.
//!
//! The latent process is split into a deterministic path `z` and a
//! Gaussian residual with mean `m` and covariance `V`. The filter
//! restarts the approximation at every observation, re-initialising `z`
//! at the current posterior mean so the ODE solution cannot drift away
//! from the filtered state over long time courses. Under restarting `m`
//! stays identically zero; its evolution equation is integrated anyway
//! and an assertion checks the invariant at every observation time.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{ParamVector, ReactionNetwork, SystemState};
use crate::observation::{Dataset, ObservationModel};
use crate::ode::{self, OdeOptions};
use crate::stats::{cholesky_with_jitter, log_mvn_density, symmetrize, COV_JITTER_LADDER};

/// Gaussian filtering state between observations.
///
/// `z`, `m`, `v` are the deterministic path, residual mean and residual
/// covariance; `a`, `c` are the filtered posterior mean and covariance at
/// the most recent observation.
#[derive(Debug, Clone)]
pub struct LnaBelief {
    pub t: f64,
    pub z: DVector<f64>,
    pub m: DVector<f64>,
    pub v: DMatrix<f64>,
    pub a: DVector<f64>,
    pub c: DMatrix<f64>,
}

impl LnaBelief {
    /// Restart the approximation at the filtered posterior: `z = a`,
    /// `m = 0`, `V = C`.
    pub fn restart(t: f64, a: DVector<f64>, c: DMatrix<f64>) -> Self {
        let u = a.len();
        LnaBelief {
            t,
            z: a.clone(),
            m: DVector::zeros(u),
            v: c.clone(),
            a,
            c,
        }
    }
}

/// Advance `(z, m, V)` to `t_end` by integrating the coupled moment ODEs
///   dz/dt = S h(z),   dm/dt = F m,   dV/dt = V F' + S diag{h(z)} S' + F V
/// with an embedded adaptive Runge–Kutta pair at relative tolerance `tol`.
pub fn integrate_moments(
    net: &ReactionNetwork,
    belief: &LnaBelief,
    c: &ParamVector,
    t_end: f64,
    tol: f64,
) -> Result<LnaBelief> {
    let u = net.num_species();
    debug_assert_eq!(belief.z.len(), u);
    if t_end < belief.t {
        return Err(Error::invalid("integrate_moments: t_end before belief time"));
    }
    if t_end == belief.t {
        return Ok(belief.clone());
    }

    let packed = pack(&belief.z, &belief.m, &belief.v);
    let opts = OdeOptions::with_rtol(tol);

    let mut hz = DVector::zeros(net.num_reactions());
    let mut jac = DMatrix::zeros(u, u);
    let mut v = DMatrix::zeros(u, u);
    let mut dv = DMatrix::zeros(u, u);
    let stoich = net.stoich().clone();

    let rhs = move |t: f64, y: &DVector<f64>, dy: &mut DVector<f64>| {
        let z = y.rows(0, u);
        let zc = z.map(|x: f64| x.max(0.0));
        // A non-finite hazard (parameter blow-up) poisons the derivative;
        // the integrator then reports failure instead of looping.
        if net.hazards_into(&zc, c, t, &mut hz).is_err()
            || net.jacobian_into(&z.clone_owned(), c, t, &mut jac).is_err()
        {
            dy.fill(f64::NAN);
            return;
        }
        // dz
        for r in 0..u {
            let mut acc = 0.0;
            for i in 0..hz.len() {
                acc += stoich[(r, i)] * hz[i];
            }
            dy[r] = acc;
        }
        // dm = F m
        for r in 0..u {
            let mut acc = 0.0;
            for q in 0..u {
                acc += jac[(r, q)] * y[u + q];
            }
            dy[u + r] = acc;
        }
        // dV = V F' + S diag{h} S' + F V
        unpack_cov(y, u, &mut v);
        let fv = &jac * &v;
        dv.copy_from(&fv);
        dv += fv.transpose();
        for i in 0..hz.len() {
            let hi = hz[i];
            if hi == 0.0 {
                continue;
            }
            for r in 0..u {
                let sr = stoich[(r, i)];
                if sr == 0.0 {
                    continue;
                }
                for q in 0..u {
                    dv[(r, q)] += hi * sr * stoich[(q, i)];
                }
            }
        }
        let mut idx = 2 * u;
        for r in 0..u {
            for q in r..u {
                dy[idx] = 0.5 * (dv[(r, q)] + dv[(q, r)]);
                idx += 1;
            }
        }
    };

    let result = ode::integrate(rhs, belief.t, t_end, packed, &opts)?;
    let (z, m, mut vout) = unpack(&result, u);
    symmetrize(&mut vout);
    Ok(LnaBelief {
        t: t_end,
        z,
        m,
        v: vout,
        a: belief.a.clone(),
        c: belief.c.clone(),
    })
}

/// Flatten the log marginal likelihood by `1/tau` (tempering). Identity
/// at `tau = 1`; -inf stays -inf.
pub fn temper(log_p: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 1.0, "tempering exponent must be >= 1");
    log_p / tau
}

/// Gaussian-filter log marginal likelihood of the dataset under the
/// restarting linear noise approximation.
///
/// The initial latent state is known: the filter starts from a point mass
/// at `x1` (posterior mean `x1`, covariance zero). Non-positive-definite
/// forecast covariances signal an irrecoverably poor parameter value and
/// yield `-inf` rather than an error.
pub fn lna_log_marginal(
    net: &ReactionNetwork,
    obs: &ObservationModel,
    data: &Dataset,
    c: &ParamVector,
    x1: &SystemState,
    tol: f64,
) -> Result<f64> {
    let u = net.num_species();
    if data.is_empty() {
        return Err(Error::invalid("lna_log_marginal: empty dataset"));
    }
    if (x1.t - data.times[0]).abs() > 1e-9 {
        return Err(Error::invalid(
            "lna_log_marginal: initial state must sit at the first observation time",
        ));
    }
    let g = obs.g_matrix(u);

    let mut a = x1.x.clone();
    let mut c_post = DMatrix::<f64>::zeros(u, u);
    let mut total = 0.0;

    // First observation: the state is known exactly, so the factor is the
    // plain observation density at x1. Under exact observation the
    // forecast covariance is zero: a consistent y contributes log 1 and an
    // inconsistent y kills the likelihood.
    match obs {
        ObservationModel::Exact { .. } => {
            let proj = g.transpose() * &a;
            let consistent = proj
                .iter()
                .zip(data.observations[0].iter())
                .all(|(p, y)| (p - y).abs() <= 1e-9);
            if !consistent {
                return Ok(f64::NEG_INFINITY);
            }
        }
        _ => {
            let mean = g.transpose() * &a;
            let sigma = obs.noise_cov(c, &a);
            match log_mvn_density(&data.observations[0], &mean, &sigma) {
                Some(lp) => total += lp,
                None => return Ok(f64::NEG_INFINITY),
            }
            // Posterior update is vacuous while C = 0.
        }
    }

    for k in 1..data.len() {
        let belief = LnaBelief::restart(data.times[k - 1], a.clone(), c_post.clone());
        let belief = integrate_moments(net, &belief, c, data.times[k], tol)?;
        assert!(
            belief.m.iter().all(|v| *v == 0.0),
            "residual mean must stay zero under restarting"
        );
        let z = belief.z;
        let v = belief.v;

        let mean = g.transpose() * &z;
        let gv = g.transpose() * &v; // p x u
        let mut forecast = &gv * &g;
        forecast += obs.noise_cov(c, &z);
        symmetrize(&mut forecast);

        let y = &data.observations[k];
        let lp = match log_mvn_density(y, &mean, &forecast) {
            Some(lp) => lp,
            None => return Ok(f64::NEG_INFINITY),
        };
        total += lp;

        let chol = match cholesky_with_jitter(&forecast, &COV_JITTER_LADDER) {
            Some(ch) => ch,
            None => return Ok(f64::NEG_INFINITY),
        };
        // a = z + V G (G'VG + Sigma)^{-1} (y - G'z)
        // C = V - V G (G'VG + Sigma)^{-1} G'V
        let innov = y - &mean;
        let solved_innov = chol.solve(&innov);
        let vg = v.clone() * &g; // u x p
        a = &z + &vg * solved_innov;
        let solved_gv = chol.solve(&gv);
        c_post = &v - &vg * solved_gv;
        symmetrize(&mut c_post);
    }

    Ok(total)
}

fn packed_len(u: usize) -> usize {
    2 * u + u * (u + 1) / 2
}

fn pack(z: &DVector<f64>, m: &DVector<f64>, v: &DMatrix<f64>) -> DVector<f64> {
    let u = z.len();
    let mut y = DVector::zeros(packed_len(u));
    y.rows_mut(0, u).copy_from(z);
    y.rows_mut(u, u).copy_from(m);
    let mut idx = 2 * u;
    for r in 0..u {
        for q in r..u {
            y[idx] = v[(r, q)];
            idx += 1;
        }
    }
    y
}

fn unpack(y: &DVector<f64>, u: usize) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let z = y.rows(0, u).clone_owned();
    let m = y.rows(u, u).clone_owned();
    let mut v = DMatrix::zeros(u, u);
    unpack_cov(y, u, &mut v);
    (z, m, v)
}

fn unpack_cov(y: &DVector<f64>, u: usize, v: &mut DMatrix<f64>) {
    let mut idx = 2 * u;
    for r in 0..u {
        for q in r..u {
            v[(r, q)] = y[idx];
            v[(q, r)] = y[idx];
            idx += 1;
        }
    }
}
