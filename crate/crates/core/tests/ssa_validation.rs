//! Distributional validation of the exact simulator against analytic and
//! generator-exponential oracles.

mod common;

use dapmmh::network::{ParamVector, Reaction, ReactionNetwork, SystemState};
use dapmmh::ssa::{ssa_propagate, ssa_simulate};
use dapmmh::stream::substream;
use nalgebra::DVector;
use statrs::function::erf::erf;

fn pure_death() -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["X".into()],
        vec!["gamma".into()],
        vec![Reaction::mass_action(vec![(0, 1)], vec![], 0)],
    )
    .unwrap()
}

fn immigration_death() -> ReactionNetwork {
    ReactionNetwork::new(
        vec!["X".into()],
        vec!["kappa".into(), "gamma".into()],
        vec![
            Reaction::mass_action(vec![], vec![(0, 1)], 0),
            Reaction::mass_action(vec![(0, 1)], vec![], 1),
        ],
    )
    .unwrap()
}

#[test]
fn pure_death_extinction_time() {
    // Sum of exponential phase means: E[T] = sum_{k=1..20} 1/(gamma k).
    let net = pure_death();
    let gamma = 0.6;
    let c = ParamVector::from_natural(&[gamma]).unwrap();
    let x0 = SystemState::new(0.0, DVector::from_vec(vec![20.0]));
    let reps = 10_000u64;
    let times: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = substream(2024, &[1, r]);
            let path = ssa_simulate(&net, &x0, &c, 200.0, &mut rng).unwrap();
            assert_eq!(path.final_state.x[0], 0.0, "population must go extinct");
            path.events.as_ref().unwrap().last().unwrap().0
        })
        .collect();
    let expect: f64 = (1..=20).map(|k| 1.0 / (gamma * k as f64)).sum();
    let (mean, se) = common::mean_se(&times);
    assert!(
        (mean - expect).abs() < 3.0 * se,
        "extinction mean {mean} vs {expect} (3se = {})",
        3.0 * se
    );
}

#[test]
fn pure_death_from_zero_never_fires() {
    let net = pure_death();
    let c = ParamVector::from_natural(&[0.6]).unwrap();
    let x0 = SystemState::new(0.0, DVector::zeros(1));
    let mut rng = substream(2024, &[2]);
    let path = ssa_simulate(&net, &x0, &c, 50.0, &mut rng).unwrap();
    assert_eq!(path.event_counts[0], 0);
    assert_eq!(path.final_state.x[0], 0.0);
}

#[test]
fn immigration_death_long_run_mean() {
    // Stationary distribution is Poisson(kappa / gamma) = Poisson(10).
    let net = immigration_death();
    let c = ParamVector::from_natural(&[10.0, 1.0]).unwrap();
    let horizon = 250.0;
    let burn = 10.0;
    let reps = 24u64;
    let averages: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = substream(99, &[3, r]);
            let x0 = SystemState::new(0.0, DVector::from_vec(vec![10.0]));
            let path = ssa_simulate(&net, &x0, &c, horizon, &mut rng).unwrap();
            // Time-weighted average of the piecewise-constant path.
            let mut x = x0.x[0];
            let mut t_prev = 0.0f64;
            let mut integral = 0.0;
            for &(t, reaction) in path.events.as_ref().unwrap() {
                if t > burn {
                    integral += x * (t - t_prev.max(burn));
                }
                x += if reaction == 0 { 1.0 } else { -1.0 };
                t_prev = t;
            }
            integral += x * (horizon - t_prev.max(burn));
            integral / (horizon - burn)
        })
        .collect();
    let (mean, se) = common::mean_se(&averages);
    assert!(
        (mean - 10.0).abs() < 3.0 * se,
        "time-average {mean} vs 10 (3se = {})",
        3.0 * se
    );
}

#[test]
fn marginal_distribution_matches_generator_exponential() {
    // Empirical law of X at t=1 vs exp(tQ) on the truncated space, in
    // total variation.
    let net = immigration_death();
    let (kappa, gamma) = (10.0, 1.0);
    let c = ParamVector::from_natural(&[kappa, gamma]).unwrap();
    let x0 = DVector::from_vec(vec![10.0]);
    let m = 60usize;
    let reps = 100_000u64;
    let mut counts = vec![0u64; m + 1];
    for r in 0..reps {
        let mut rng = substream(404, &[r]);
        let x = ssa_propagate(&net, &x0, &c, 0.0, 1.0, &mut rng, None).unwrap();
        let idx = (x[0] as usize).min(m);
        counts[idx] += 1;
    }
    let exact = common::imm_death_distribution(kappa, gamma, 10, 1.0, m);
    let tv: f64 = (0..=m)
        .map(|i| (counts[i] as f64 / reps as f64 - exact[i]).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation {tv}");
}

/// First-reaction simulation of the gene-expression system, written as an
/// independent oracle: every reaction proposes its own next firing time
/// (closed-form time change for the pulse hazard, exponential for the
/// rest) and the earliest one fires.
mod first_reaction {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    pub struct GeneParams {
        pub gamma_r: f64,
        pub gamma_p: f64,
        pub kappa_p: f64,
        pub b0: f64,
        pub b1: f64,
        pub b2: f64,
        pub b3: f64,
    }

    /// Integral of the pulse rate b0 exp(-b1 (u-b2)^2) + b3 over [t0, t1].
    fn pulse_integral(p: &GeneParams, t0: f64, t1: f64) -> f64 {
        let s = p.b1.sqrt();
        let root_pi = std::f64::consts::PI.sqrt();
        p.b0 * root_pi / (2.0 * s) * (erf(s * (t1 - p.b2)) - erf(s * (t0 - p.b2)))
            + p.b3 * (t1 - t0)
    }

    /// Solve pulse_integral(t, t + w) = target for w by bisection.
    fn pulse_waiting_time(p: &GeneParams, t: f64, target: f64) -> f64 {
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        while pulse_integral(p, t, t + hi) < target {
            hi *= 2.0;
            if hi > 1e6 {
                return hi;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pulse_integral(p, t, t + mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// State (R, P) at time t1 starting from (r, p) at t0.
    pub fn simulate(
        p: &GeneParams,
        mut r: f64,
        mut prot: f64,
        t0: f64,
        t1: f64,
        rng: &mut ChaCha8Rng,
    ) -> (f64, f64) {
        let mut t = t0;
        loop {
            let exp_draw = |rng: &mut ChaCha8Rng| -> f64 { -(1.0 - rng.gen::<f64>()).ln() };
            // Candidate waiting times, one clock per reaction.
            let w_pulse = pulse_waiting_time(p, t, exp_draw(rng));
            let w_decay_r = if r > 0.0 {
                exp_draw(rng) / (p.gamma_r * r)
            } else {
                f64::INFINITY
            };
            let w_translate = if r > 0.0 {
                exp_draw(rng) / (p.kappa_p * r)
            } else {
                f64::INFINITY
            };
            let w_decay_p = if prot > 0.0 {
                exp_draw(rng) / (p.gamma_p * prot)
            } else {
                f64::INFINITY
            };
            let waits = [w_pulse, w_decay_r, w_translate, w_decay_p];
            let (winner, w) = waits
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, w)| (i, *w))
                .unwrap();
            if t + w >= t1 {
                return (r, prot);
            }
            t += w;
            match winner {
                0 => r += 1.0,
                1 => r -= 1.0,
                2 => prot += 1.0,
                _ => prot -= 1.0,
            }
        }
    }
}

#[test]
fn gene_expression_thinning_matches_first_reaction() {
    let bundle = dapmmh::models::build_gene_expression();
    let truth = [0.44, 0.52, 10.0, 15.0, 0.4, 7.0, 3.0, 10.0];
    let c = ParamVector::from_natural(&truth).unwrap();
    let params = first_reaction::GeneParams {
        gamma_r: truth[0],
        gamma_p: truth[1],
        kappa_p: truth[2],
        b0: truth[3],
        b1: truth[4],
        b2: truth[5],
        b3: truth[6],
    };
    let x0 = DVector::from_vec(vec![10.0, 150.0]);
    let (t0, t1) = (5.0, 6.5); // straddles the transcription pulse peak
    let reps = 3000u64;

    let mut thin_r = Vec::with_capacity(reps as usize);
    let mut thin_p = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let mut rng = substream(7100, &[rep]);
        let x = ssa_propagate(&bundle.network, &x0, &c, t0, t1, &mut rng, None).unwrap();
        thin_r.push(x[0]);
        thin_p.push(x[1]);
    }

    let mut fr_r = Vec::with_capacity(reps as usize);
    let mut fr_p = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        let mut rng = substream(7200, &[rep]);
        let (r, p) = first_reaction::simulate(&params, 10.0, 150.0, t0, t1, &mut rng);
        fr_r.push(r);
        fr_p.push(p);
    }

    let p_r = common::ks2_pvalue(&thin_r, &fr_r);
    let p_p = common::ks2_pvalue(&thin_p, &fr_p);
    assert!(p_r > 0.001, "mRNA KS p-value {p_r}");
    assert!(p_p > 0.001, "protein KS p-value {p_p}");
}
