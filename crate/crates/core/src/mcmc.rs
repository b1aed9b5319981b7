//! Random-walk pseudo-marginal MCMC kernels.
//!
//! `pmmh_run` is the plain particle-marginal Metropolis-Hastings chain:
//! one marginal-likelihood estimate per iteration, cached value reused on
//! rejection (the estimate at the current state is never recomputed).
//!
//! `dapmmh_run` adds a delayed-acceptance screen: a cheap surrogate
//! likelihood gates stage one and the expensive exact estimate is only
//! computed for proposals that pass. The stage-two ratio divides out the
//! surrogate so the chain still targets the exact posterior, whether the
//! surrogate is deterministic (LNA, optionally tempered) or itself a
//! noisy particle-filter estimate (CLE).

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lna::{lna_log_marginal, temper};
use crate::network::{ParamVector, ReactionNetwork, SystemState};
use crate::observation::{Dataset, ObservationModel};
use crate::prior::PriorSpec;
use crate::smc::{bootstrap_filter, FilterStream, Simulator};
use crate::stats::mean_and_variance;
use crate::stream::{purpose, substream};

/// A (possibly stochastic) log marginal-likelihood estimator.
///
/// Implementations draw any randomness from streams derived from the
/// iteration number, so an estimate is a deterministic function of
/// `(log_c, iteration)` and the pseudo-marginal caching discipline is
/// exactly reproducible.
pub trait LogMarginal: Sync {
    fn log_marginal(&self, log_c: &DVector<f64>, iteration: u64) -> f64;
}

/// Exact-model estimator: bootstrap filter driven by the jump-process
/// simulator.
pub struct MjpFilterLik<'a> {
    pub net: &'a ReactionNetwork,
    pub obs: &'a ObservationModel,
    pub data: &'a Dataset,
    pub x1: &'a SystemState,
    pub n_particles: usize,
    pub master_seed: u64,
    pub stream_tag: u64,
    pub max_events: Option<u64>,
}

impl LogMarginal for MjpFilterLik<'_> {
    fn log_marginal(&self, log_c: &DVector<f64>, iteration: u64) -> f64 {
        let c = match ParamVector::from_log(log_c) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        let stream = FilterStream {
            master_seed: self.master_seed,
            stream_tag: self.stream_tag,
            iteration,
        };
        bootstrap_filter(
            Simulator::Ssa {
                max_events: self.max_events,
            },
            self.net,
            self.obs,
            self.data,
            &c,
            self.x1,
            self.n_particles,
            &stream,
        )
        .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Surrogate estimator: bootstrap filter driven by the Euler-Maruyama
/// CLE.
pub struct CleFilterLik<'a> {
    pub net: &'a ReactionNetwork,
    pub obs: &'a ObservationModel,
    pub data: &'a Dataset,
    pub x1: &'a SystemState,
    pub n_particles: usize,
    pub dt_max: f64,
    pub master_seed: u64,
    pub stream_tag: u64,
}

impl LogMarginal for CleFilterLik<'_> {
    fn log_marginal(&self, log_c: &DVector<f64>, iteration: u64) -> f64 {
        let c = match ParamVector::from_log(log_c) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        let stream = FilterStream {
            master_seed: self.master_seed,
            stream_tag: self.stream_tag,
            iteration,
        };
        bootstrap_filter(
            Simulator::Cle {
                dt_max: self.dt_max,
            },
            self.net,
            self.obs,
            self.data,
            &c,
            self.x1,
            self.n_particles,
            &stream,
        )
        .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Surrogate estimator: deterministic LNA marginal likelihood, tempered
/// by `1/tau`.
pub struct LnaLik<'a> {
    pub net: &'a ReactionNetwork,
    pub obs: &'a ObservationModel,
    pub data: &'a Dataset,
    pub x1: &'a SystemState,
    pub rtol: f64,
    pub tau: f64,
}

impl LogMarginal for LnaLik<'_> {
    fn log_marginal(&self, log_c: &DVector<f64>, _iteration: u64) -> f64 {
        let c = match ParamVector::from_log(log_c) {
            Ok(c) => c,
            Err(_) => return f64::NEG_INFINITY,
        };
        let lp = lna_log_marginal(self.net, self.obs, self.data, &c, self.x1, self.rtol)
            .unwrap_or(f64::NEG_INFINITY);
        temper(lp, self.tau)
    }
}

/// Wrap a closure as an estimator (used by tests and tuning).
pub struct FnLik<F: Fn(&DVector<f64>, u64) -> f64 + Sync>(pub F);

impl<F: Fn(&DVector<f64>, u64) -> f64 + Sync> LogMarginal for FnLik<F> {
    fn log_marginal(&self, log_c: &DVector<f64>, iteration: u64) -> f64 {
        (self.0)(log_c, iteration)
    }
}

/// Current chain position with cached likelihood values.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub log_c: DVector<f64>,
    pub log_prior: f64,
    pub log_ml_exact: f64,
    pub log_ml_surrogate: f64,
    pub iteration: u64,
}

/// Gaussian random-walk proposal: innovation covariance
/// `lambda * (2.38^2 / d_eff) * var_hat`.
#[derive(Debug, Clone)]
pub struct ProposalSpec {
    pub lambda: f64,
    pub var_hat: DMatrix<f64>,
    pub d_eff: f64,
}

impl ProposalSpec {
    pub fn new(lambda: f64, var_hat: DMatrix<f64>, d_eff: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(d_eff > 0.0) {
            return Err(Error::invalid("proposal scale and divisor must be positive"));
        }
        if var_hat.nrows() != var_hat.ncols() {
            return Err(Error::invalid("proposal covariance must be square"));
        }
        Ok(ProposalSpec {
            lambda,
            var_hat,
            d_eff,
        })
    }

    /// Isotropic proposal with per-component innovation `sd` (pilot use).
    pub fn isotropic(dim: usize, sd: f64) -> Self {
        let d_eff = dim as f64;
        let var = sd * sd * d_eff / (2.38 * 2.38);
        ProposalSpec {
            lambda: 1.0,
            var_hat: DMatrix::identity(dim, dim) * var,
            d_eff,
        }
    }

    pub fn innovation_cov(&self) -> DMatrix<f64> {
        &self.var_hat * (self.lambda * 2.38 * 2.38 / self.d_eff)
    }

    fn innovation_chol(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.innovation_cov()).ok_or(Error::CholeskyFailed {
            context: "proposal innovation covariance",
        })
    }
}

/// Draw a random-walk candidate (symmetric, so proposal ratios cancel).
pub fn rw_propose(
    state: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let eta = DVector::from_fn(state.len(), |_, _| rng.sample(StandardNormal));
    state + chol.l() * eta
}

/// Metropolis-Hastings acceptance probability `min(1, exp(num - den))`
/// from log-scale inputs.
pub fn mh_accept_prob(log_num: f64, log_den: f64) -> f64 {
    if log_num == f64::NEG_INFINITY {
        return 0.0;
    }
    if log_den == f64::NEG_INFINITY {
        return 1.0;
    }
    (log_num - log_den).exp().min(1.0)
}

/// Tuning knobs shared by both kernels.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub iterations: u64,
    pub init_log_c: DVector<f64>,
    pub master_seed: u64,
    /// rayon worker threads for particle propagation.
    pub workers: usize,
    /// Fraction of the chain discarded before computing ESS.
    pub burn_in: f64,
}

impl McmcConfig {
    pub fn new(iterations: u64, init_log_c: DVector<f64>, master_seed: u64) -> Self {
        McmcConfig {
            iterations,
            init_log_c,
            master_seed,
            workers: 1,
            burn_in: 0.1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

/// Everything a run produces: the chain, cached-likelihood traces,
/// acceptance accounting and diagnostics.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// One log-scale draw per iteration (initial state excluded).
    pub samples: Vec<DVector<f64>>,
    /// Cached exact log marginal likelihood per iteration.
    pub trace_exact: Vec<f64>,
    /// Cached surrogate log marginal likelihood per iteration (delayed
    /// acceptance only).
    pub trace_surrogate: Option<Vec<f64>>,
    /// Stage-one acceptance rate (plain MH acceptance rate for PMMH).
    pub alpha1: f64,
    /// Stage-two acceptance rate among stage-one passes (1 for PMMH).
    pub alpha2_given_1: f64,
    pub ess_per_param: Vec<f64>,
    pub wall_time: f64,
    /// Number of exact-filter runs triggered by stage-one passes.
    pub stage2_invocations: u64,
    pub stage1_accepts: u64,
    pub stage2_accepts: u64,
    /// Total exact-estimator invocations (including initialisation).
    pub filter_calls: u64,
    pub surrogate_calls: u64,
    /// Proposals rejected on zero prior mass without any likelihood work.
    pub prior_rejections: u64,
    pub iterations: u64,
    pub burn_in: f64,
    /// Smallest stage-two log acceptance ratio seen (infinity when stage
    /// two never ran).
    pub min_stage2_log_ratio: f64,
}

impl RunReport {
    /// Column of the post-burn-in chain for one parameter.
    pub fn chain_column(&self, j: usize) -> Vec<f64> {
        let skip = (self.samples.len() as f64 * self.burn_in).floor() as usize;
        self.samples.iter().skip(skip).map(|s| s[j]).collect()
    }

    fn finish_diagnostics(&mut self) {
        let d = self.samples.first().map_or(0, |s| s.len());
        self.ess_per_param = (0..d)
            .map(|j| ess(&self.chain_column(j)).unwrap_or(1.0))
            .collect();
    }
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// Particle-marginal Metropolis-Hastings targeting the exact posterior.
pub fn pmmh_run(
    exact: &dyn LogMarginal,
    prior: &PriorSpec,
    proposal: &ProposalSpec,
    cfg: &McmcConfig,
) -> Result<RunReport> {
    let start = Instant::now();
    let pool = build_pool(cfg.workers)?;
    let chol = proposal.innovation_chol()?;
    let mut rng = substream(cfg.master_seed, &[purpose::CHAIN]);

    let log_prior0 = prior.log_density(&cfg.init_log_c);
    if log_prior0 == f64::NEG_INFINITY {
        return Err(Error::invalid("initial state has zero prior mass"));
    }
    let mut filter_calls = 1u64;
    let l0 = pool.install(|| exact.log_marginal(&cfg.init_log_c, 0));
    let mut state = ChainState {
        log_c: cfg.init_log_c.clone(),
        log_prior: log_prior0,
        log_ml_exact: l0,
        log_ml_surrogate: f64::NAN,
        iteration: 0,
    };

    let n = cfg.iterations as usize;
    let mut samples = Vec::with_capacity(n);
    let mut trace_exact = Vec::with_capacity(n);
    let mut accepts = 0u64;
    let mut prior_rejections = 0u64;

    for i in 1..=cfg.iterations {
        let cand = rw_propose(&state.log_c, &chol, &mut rng);
        let lp_cand = prior.log_density(&cand);
        if lp_cand == f64::NEG_INFINITY {
            prior_rejections += 1;
        } else {
            let l_cand = pool.install(|| exact.log_marginal(&cand, i));
            filter_calls += 1;
            let log_ratio = (l_cand + lp_cand) - (state.log_ml_exact + state.log_prior);
            let u: f64 = rng.gen();
            if u.ln() < log_ratio {
                accepts += 1;
                state.log_c = cand;
                state.log_prior = lp_cand;
                state.log_ml_exact = l_cand;
            }
        }
        state.iteration = i;
        samples.push(state.log_c.clone());
        trace_exact.push(state.log_ml_exact);
    }

    let mut report = RunReport {
        samples,
        trace_exact,
        trace_surrogate: None,
        alpha1: accepts as f64 / cfg.iterations.max(1) as f64,
        alpha2_given_1: 1.0,
        ess_per_param: Vec::new(),
        wall_time: start.elapsed().as_secs_f64(),
        stage2_invocations: filter_calls - 1,
        stage1_accepts: accepts,
        stage2_accepts: accepts,
        filter_calls,
        surrogate_calls: 0,
        prior_rejections,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        min_stage2_log_ratio: f64::INFINITY,
    };
    report.finish_diagnostics();
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Delayed-acceptance PMMH: surrogate screen at stage one, exact filter
/// and surrogate-correcting ratio at stage two. All cached quantities are
/// carried forward unchanged on any rejection.
pub fn dapmmh_run(
    exact: &dyn LogMarginal,
    surrogate: &dyn LogMarginal,
    prior: &PriorSpec,
    proposal: &ProposalSpec,
    cfg: &McmcConfig,
) -> Result<RunReport> {
    let start = Instant::now();
    let pool = build_pool(cfg.workers)?;
    let chol = proposal.innovation_chol()?;
    let mut rng = substream(cfg.master_seed, &[purpose::CHAIN]);

    let log_prior0 = prior.log_density(&cfg.init_log_c);
    if log_prior0 == f64::NEG_INFINITY {
        return Err(Error::invalid("initial state has zero prior mass"));
    }
    let l0 = pool.install(|| exact.log_marginal(&cfg.init_log_c, 0));
    let la0 = pool.install(|| surrogate.log_marginal(&cfg.init_log_c, 0));
    let mut filter_calls = 1u64;
    let mut surrogate_calls = 1u64;
    let mut state = ChainState {
        log_c: cfg.init_log_c.clone(),
        log_prior: log_prior0,
        log_ml_exact: l0,
        log_ml_surrogate: la0,
        iteration: 0,
    };

    let n = cfg.iterations as usize;
    let mut samples = Vec::with_capacity(n);
    let mut trace_exact = Vec::with_capacity(n);
    let mut trace_surrogate = Vec::with_capacity(n);
    let mut stage1_accepts = 0u64;
    let mut stage2_accepts = 0u64;
    let mut prior_rejections = 0u64;
    let mut min_stage2_log_ratio = f64::INFINITY;

    for i in 1..=cfg.iterations {
        let cand = rw_propose(&state.log_c, &chol, &mut rng);
        let lp_cand = prior.log_density(&cand);
        if lp_cand == f64::NEG_INFINITY {
            prior_rejections += 1;
        } else {
            let la_cand = pool.install(|| surrogate.log_marginal(&cand, i));
            surrogate_calls += 1;
            let stage1_ratio =
                (la_cand + lp_cand) - (state.log_ml_surrogate + state.log_prior);
            let u1: f64 = rng.gen();
            if u1.ln() < stage1_ratio {
                stage1_accepts += 1;
                let l_cand = pool.install(|| exact.log_marginal(&cand, i));
                filter_calls += 1;
                // Exact-model MH ratio times the reciprocal of the
                // surrogate ratio used at stage one.
                let stage2_ratio = (l_cand + lp_cand + state.log_ml_surrogate + state.log_prior)
                    - (state.log_ml_exact + state.log_prior + la_cand + lp_cand);
                if stage2_ratio < min_stage2_log_ratio {
                    min_stage2_log_ratio = stage2_ratio;
                }
                let u2: f64 = rng.gen();
                if u2.ln() < stage2_ratio {
                    stage2_accepts += 1;
                    state.log_c = cand;
                    state.log_prior = lp_cand;
                    state.log_ml_exact = l_cand;
                    state.log_ml_surrogate = la_cand;
                }
            }
        }
        state.iteration = i;
        samples.push(state.log_c.clone());
        trace_exact.push(state.log_ml_exact);
        trace_surrogate.push(state.log_ml_surrogate);
    }

    let mut report = RunReport {
        samples,
        trace_exact,
        trace_surrogate: Some(trace_surrogate),
        alpha1: stage1_accepts as f64 / cfg.iterations.max(1) as f64,
        alpha2_given_1: if stage1_accepts == 0 {
            0.0
        } else {
            stage2_accepts as f64 / stage1_accepts as f64
        },
        ess_per_param: Vec::new(),
        wall_time: 0.0,
        stage2_invocations: stage1_accepts,
        stage1_accepts,
        stage2_accepts,
        filter_calls,
        surrogate_calls,
        prior_rejections,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        min_stage2_log_ratio,
    };
    report.finish_diagnostics();
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Outcome of the particle-count search.
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub chosen: usize,
    /// (candidate N, sample variance of the log estimate).
    pub table: Vec<(usize, f64)>,
    pub warning: Option<String>,
}

/// Pick the number of particles so that Var(log p-hat) at a fixed
/// parameter value lands in [1, 1.5].
///
/// `eval(n, rep)` returns one independent log marginal-likelihood
/// estimate using `n` particles. If every candidate undershoots the
/// target band the smallest (cheapest) candidate is returned; if every
/// candidate overshoots, the largest. Both fallbacks carry a warning.
pub fn pilot_tune_particles<F>(candidates: &[usize], reps: usize, eval: F) -> Result<TuneOutcome>
where
    F: Fn(usize, u64) -> f64,
{
    if candidates.is_empty() || reps < 2 {
        return Err(Error::invalid("tuning needs candidates and at least two repetitions"));
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    let mut table = Vec::with_capacity(sorted.len());
    for &n in &sorted {
        let vals: Vec<f64> = (0..reps as u64).map(|r| eval(n, r)).collect();
        let var = if vals.iter().all(|v| v.is_finite()) {
            mean_and_variance(&vals).1
        } else {
            f64::INFINITY
        };
        table.push((n, var));
    }
    if let Some(&(n, _)) = table.iter().find(|(_, v)| (1.0..=1.5).contains(v)) {
        return Ok(TuneOutcome {
            chosen: n,
            table,
            warning: None,
        });
    }
    if let Some(&(n, v)) = table.iter().find(|(_, v)| *v < 1.0) {
        return Ok(TuneOutcome {
            chosen: n,
            table,
            warning: Some(format!(
                "variance {v:.3} at N = {n} is already below the [1, 1.5] target; smallest sufficient candidate returned"
            )),
        });
    }
    let &(n, v) = table.last().unwrap();
    Ok(TuneOutcome {
        chosen: n,
        table,
        warning: Some(format!(
            "no candidate reached the [1, 1.5] target variance (best {v:.3} at N = {n}); largest candidate returned"
        )),
    })
}

/// Effective sample size via the initial positive sequence rule on
/// autocorrelation pairs. Constant chains return 1 by convention.
pub fn ess(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 10 {
        return Err(Error::invalid("ess needs a chain of length >= 10"));
    }
    let (mean, var) = mean_and_variance(chain);
    if var == 0.0 || !var.is_finite() {
        return Ok(1.0);
    }
    let nf = n as f64;
    // Biased autocovariances, as in the usual IACT estimator.
    let autocov = |k: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..(n - k) {
            s += (chain[i] - mean) * (chain[i + k] - mean);
        }
        s / nf
    };
    let c0 = autocov(0);
    let mut sum_pairs = 0.0;
    let mut m = 0usize;
    loop {
        let k0 = 2 * m;
        let k1 = 2 * m + 1;
        if k1 >= n - 1 {
            break;
        }
        let pair = autocov(k0) + autocov(k1);
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        m += 1;
    }
    let iact = (2.0 * sum_pairs / c0 - 1.0).max(1e-8);
    Ok(nf / iact)
}

/// Posterior mean and covariance of the log-scale chain after burn-in
/// (feeds the main run's proposal).
pub fn chain_mean_and_cov(samples: &[DVector<f64>], burn_in: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let skip = (samples.len() as f64 * burn_in).floor() as usize;
    let kept = &samples[skip.min(samples.len())..];
    if kept.len() < 2 {
        return Err(Error::invalid("not enough samples for a covariance estimate"));
    }
    let d = kept[0].len();
    let nf = kept.len() as f64;
    let mut mean = DVector::zeros(d);
    for s in kept {
        mean += s;
    }
    mean /= nf;
    let mut cov = DMatrix::zeros(d, d);
    for s in kept {
        let diff = s - &mean;
        cov += &diff * diff.transpose();
    }
    cov /= nf - 1.0;
    Ok((mean, cov))
}
