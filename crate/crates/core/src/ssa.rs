//! Exact forward simulation of the Markov jump process.
//!
//! Time-homogeneous networks use the direct method: exponential waiting
//! time at the total hazard, categorical reaction choice. Networks with a
//! time-dependent hazard use thinning: candidate events are proposed at a
//! dominating rate valid while the state is unchanged and accepted with
//! probability total-hazard/bound, which is exact.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::network::{total_hazard, Hazard, ParamVector, ReactionNetwork, SystemState};

/// A realized jump path over one interval.
///
/// `events` is `None` when the path was simulated in states-only mode;
/// event counts and the final state are always recorded.
#[derive(Debug, Clone)]
pub struct JumpPath {
    pub initial: SystemState,
    pub events: Option<Vec<(f64, usize)>>,
    pub final_state: SystemState,
    pub event_counts: Vec<u64>,
}

/// Exact draw of the jump process on `[x0.t, t1]`, recording every event.
pub fn ssa_simulate(
    net: &ReactionNetwork,
    x0: &SystemState,
    c: &ParamVector,
    t1: f64,
    rng: &mut ChaCha8Rng,
) -> Result<JumpPath> {
    simulate_core(net, x0, c, t1, rng, true, None)
}

/// States-only simulation: returns just the state at `t1`. This is what
/// the particle filter uses; with thousands of particles the event lists
/// dominate memory.
pub fn ssa_propagate(
    net: &ReactionNetwork,
    x: &DVector<f64>,
    c: &ParamVector,
    t0: f64,
    t1: f64,
    rng: &mut ChaCha8Rng,
    max_events: Option<u64>,
) -> Result<DVector<f64>> {
    let x0 = SystemState::new(t0, x.clone());
    let path = simulate_core(net, &x0, c, t1, rng, false, max_events)?;
    Ok(path.final_state.x)
}

/// Dominating rate for the thinning sampler: an upper bound on the total
/// hazard over `[t0, t1]` for the fixed state `x`. Tight (equal to the
/// total hazard) for time-homogeneous networks.
pub fn upper_bound_rate(
    net: &ReactionNetwork,
    x: &DVector<f64>,
    c: &ParamVector,
    t0: f64,
    t1: f64,
) -> Result<f64> {
    let h = net.hazards(x, c, t0)?;
    let mut bound = 0.0;
    for (i, hz) in net.hazard_kinds().iter().enumerate() {
        bound += match hz {
            Hazard::MassAction { .. } => h[i],
            Hazard::GaussianPulse {
                amplitude, baseline, ..
            } => c.natural(*amplitude) + c.natural(*baseline),
            Hazard::Custom { sup, .. } => {
                let b = sup(x, c, t0, t1);
                if !b.is_finite() || b < 0.0 {
                    return Err(Error::NonFiniteHazard { reaction: i, t: t0 });
                }
                b
            }
        };
    }
    Ok(bound)
}

fn simulate_core(
    net: &ReactionNetwork,
    x0: &SystemState,
    c: &ParamVector,
    t1: f64,
    rng: &mut ChaCha8Rng,
    record_events: bool,
    max_events: Option<u64>,
) -> Result<JumpPath> {
    let t0 = x0.t;
    if !(t1 > t0) {
        return Err(Error::invalid("ssa: t1 must exceed the initial time"));
    }
    if x0.x.iter().any(|v| *v < 0.0) {
        let index = x0.x.iter().position(|v| *v < 0.0).unwrap();
        return Err(Error::NegativeState {
            index,
            value: x0.x[index],
        });
    }

    let mut events = if record_events { Some(Vec::new()) } else { None };
    let mut counts = vec![0u64; net.num_reactions()];
    let mut x = x0.x.clone();
    let mut h = DVector::zeros(net.num_reactions());
    let mut n_events = 0u64;

    if net.is_time_homogeneous() {
        let mut t = t0;
        loop {
            net.hazards_into(&x, c, t, &mut h)?;
            let h0 = total_hazard(&h);
            if h0 <= 0.0 {
                break;
            }
            t += rng.sample::<f64, _>(Exp1) / h0;
            if t >= t1 {
                break;
            }
            let i = pick_reaction(&h, h0, rng);
            apply_reaction(net, &mut x, i);
            counts[i] += 1;
            if let Some(ev) = events.as_mut() {
                ev.push((t, i));
            }
            n_events += 1;
            if let Some(budget) = max_events {
                if n_events >= budget {
                    return Err(Error::EventBudgetExceeded { t, budget });
                }
            }
        }
    } else {
        let mut t = t0;
        let mut bound = upper_bound_rate(net, &x, c, t, t1)?;
        loop {
            if bound <= 0.0 {
                break;
            }
            t += rng.sample::<f64, _>(Exp1) / bound;
            if t >= t1 {
                break;
            }
            net.hazards_into(&x, c, t, &mut h)?;
            let h0 = total_hazard(&h);
            if h0 > bound * (1.0 + 1e-12) {
                return Err(Error::ThinningBoundViolated {
                    t,
                    total: h0,
                    bound,
                });
            }
            // Accept the candidate with probability h0 / bound.
            if rng.gen::<f64>() * bound < h0 {
                let i = pick_reaction(&h, h0, rng);
                apply_reaction(net, &mut x, i);
                counts[i] += 1;
                if let Some(ev) = events.as_mut() {
                    ev.push((t, i));
                }
                n_events += 1;
                if let Some(budget) = max_events {
                    if n_events >= budget {
                        return Err(Error::EventBudgetExceeded { t, budget });
                    }
                }
                bound = upper_bound_rate(net, &x, c, t, t1)?;
            }
        }
    }

    Ok(JumpPath {
        initial: x0.clone(),
        events,
        final_state: SystemState::new(t1, x),
        event_counts: counts,
    })
}

#[inline]
fn pick_reaction(h: &DVector<f64>, h0: f64, rng: &mut ChaCha8Rng) -> usize {
    let target = rng.gen::<f64>() * h0;
    let mut acc = 0.0;
    for (i, hi) in h.iter().enumerate() {
        acc += hi;
        if target < acc {
            return i;
        }
    }
    h.len() - 1
}

#[inline]
fn apply_reaction(net: &ReactionNetwork, x: &mut DVector<f64>, i: usize) {
    let s = net.stoich();
    for j in 0..x.len() {
        x[j] += s[(j, i)];
    }
}
