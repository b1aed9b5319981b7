//! The three built-in experiments, each bundled as network + observation
//! model + priors + initial state + data.
//!
//! * `lotka-volterra` — predator/prey with Poisson-count observations of
//!   prey only, 50 unit-spaced observations, log-uniform priors.
//! * `gene-expression` — transcription/translation with a Gaussian-pulse
//!   transcription rate, Gaussian observations of protein only (noise
//!   s.d. inferred), 100 observations spaced 0.25 hours.
//! * `abakaliki` — SIR epidemic fit to the bundled smallpox removal
//!   records: daily, error-free observation of susceptible + infective.
//!
//! Synthetic experiments regenerate their data by exact simulation from
//! the stored true parameters and a documented seed, so datasets are
//! bit-reproducible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{Hazard, ParamVector, Reaction, ReactionNetwork, SystemState};
use crate::observation::{Dataset, NoiseSpec, ObservationModel};
use crate::prior::{ParamPrior, PriorSpec};
use crate::ssa::ssa_propagate;
use crate::stream::{purpose, substream};

/// Algorithm settings that reproduce the experiment as published:
/// particle count, proposal scale, tempering exponent and CLE step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDefaults {
    pub n_particles: usize,
    pub lambda: f64,
    pub tau: f64,
    pub dt_max: f64,
    /// Seed used to regenerate synthetic data.
    pub data_seed: u64,
}

/// A fully specified, reusable experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBundle {
    pub name: String,
    pub network: ReactionNetwork,
    pub obs: ObservationModel,
    pub prior: PriorSpec,
    /// Data-generating parameters; absent for real-data experiments.
    pub true_params: Option<ParamVector>,
    pub x1: SystemState,
    /// Observation times; the initial state sits at the first entry.
    pub obs_times: Vec<f64>,
    /// Bundled observations (real-data experiments only).
    pub data: Option<Dataset>,
    pub defaults: RunDefaults,
}

impl ExperimentBundle {
    /// Bundled data, or synthetic data regenerated from the default seed.
    pub fn dataset(&self) -> Result<Dataset> {
        match &self.data {
            Some(d) => Ok(d.clone()),
            None => self.generate_data(self.defaults.data_seed),
        }
    }

    /// Synthesize observations by exact simulation from the true
    /// parameters. Deterministic in the seed.
    pub fn generate_data(&self, seed: u64) -> Result<Dataset> {
        let truth = self
            .true_params
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{}: no true parameters to simulate from", self.name)))?;
        let mut rng = substream(seed, &[purpose::DATA_GEN]);
        let mut x = self.x1.x.clone();
        let mut observations = Vec::with_capacity(self.obs_times.len());
        observations.push(self.obs.sample(&x, truth, &mut rng));
        for k in 1..self.obs_times.len() {
            x = ssa_propagate(
                &self.network,
                &x,
                truth,
                self.obs_times[k - 1],
                self.obs_times[k],
                &mut rng,
                None,
            )?;
            observations.push(self.obs.sample(&x, truth, &mut rng));
        }
        Dataset::new(self.obs_times.clone(), observations)
    }

    /// Default chain start: the truth when known, otherwise prior
    /// typical values.
    pub fn init_log_c(&self) -> DVector<f64> {
        match &self.true_params {
            Some(c) => c.logs().clone(),
            None => DVector::from_iterator(
                self.prior.dim(),
                self.prior.typical().into_iter().map(f64::ln),
            ),
        }
    }

    pub fn param_dim(&self) -> usize {
        self.prior.dim()
    }
}

/// Look up a built-in experiment by name.
pub fn builtin(name: &str) -> Option<ExperimentBundle> {
    match name {
        "lotka-volterra" => Some(build_lotka_volterra()),
        "gene-expression" => Some(build_gene_expression()),
        "abakaliki" => Some(build_abakaliki()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["lotka-volterra", "gene-expression", "abakaliki"];

/// Predator/prey system: prey birth, predation, predator death.
/// True rates (1.0, 0.005, 0.6); Poisson counts of prey at t = 1..50.
pub fn build_lotka_volterra() -> ExperimentBundle {
    let network = ReactionNetwork::new(
        vec!["prey".into(), "predator".into()],
        vec!["c1".into(), "c2".into(), "c3".into()],
        vec![
            Reaction::mass_action(vec![(0, 1)], vec![(0, 2)], 0),
            Reaction::mass_action(vec![(0, 1), (1, 1)], vec![(1, 2)], 1),
            Reaction::mass_action(vec![(1, 1)], vec![], 2),
        ],
    )
    .expect("static model definition");
    let obs = ObservationModel::poisson(vec![0]).expect("static model definition");
    let prior = PriorSpec::new(vec![
        ParamPrior::LogUniform { lo: -8.0, hi: 8.0 },
        ParamPrior::LogUniform { lo: -8.0, hi: 8.0 },
        ParamPrior::LogUniform { lo: -8.0, hi: 8.0 },
    ])
    .expect("static model definition");
    ExperimentBundle {
        name: "lotka-volterra".into(),
        network,
        obs,
        prior,
        true_params: Some(ParamVector::from_natural(&[1.0, 0.005, 0.6]).unwrap()),
        x1: SystemState::new(1.0, DVector::from_vec(vec![70.0, 80.0])),
        obs_times: (1..=50).map(|k| k as f64).collect(),
        data: None,
        defaults: RunDefaults {
            n_particles: 200,
            lambda: 3.0,
            tau: 1.0,
            dt_max: 0.0625,
            data_seed: 101,
        },
    }
}

/// Two-species gene expression (mRNA, protein) with a Gaussian-pulse
/// transcription rate; protein observed with Gaussian noise whose
/// standard deviation is itself inferred. Time unit: hours.
pub fn build_gene_expression() -> ExperimentBundle {
    let network = ReactionNetwork::new(
        vec!["mrna".into(), "protein".into()],
        vec![
            "gamma_R".into(),
            "gamma_P".into(),
            "kappa_P".into(),
            "b0".into(),
            "b1".into(),
            "b2".into(),
            "b3".into(),
            "sigma".into(),
        ],
        vec![
            Reaction {
                reactants: vec![],
                products: vec![(0, 1)],
                hazard: Hazard::GaussianPulse {
                    amplitude: 3,
                    decay: 4,
                    center: 5,
                    baseline: 6,
                },
            },
            Reaction::mass_action(vec![(0, 1)], vec![], 0),
            Reaction::mass_action(vec![(0, 1)], vec![(0, 1), (1, 1)], 2),
            Reaction::mass_action(vec![(1, 1)], vec![], 1),
        ],
    )
    .expect("static model definition");
    let g = DMatrix::from_vec(2, 1, vec![0.0, 1.0]);
    let obs = ObservationModel::linear_gaussian(g, NoiseSpec::ParamStdDev(7))
        .expect("static model definition");
    let prior = PriorSpec::new(vec![
        ParamPrior::Gamma {
            shape: 19.36,
            rate: 44.0,
        },
        ParamPrior::Gamma {
            shape: 27.04,
            rate: 52.0,
        },
        ParamPrior::Exponential { rate: 0.01 },
        ParamPrior::Exponential { rate: 0.01 },
        ParamPrior::Exponential { rate: 1.0 },
        ParamPrior::Exponential { rate: 0.1 },
        ParamPrior::Exponential { rate: 0.01 },
        ParamPrior::Exponential { rate: 0.01 },
    ])
    .expect("static model definition");
    ExperimentBundle {
        name: "gene-expression".into(),
        network,
        obs,
        prior,
        true_params: Some(
            ParamVector::from_natural(&[0.44, 0.52, 10.0, 15.0, 0.4, 7.0, 3.0, 10.0]).unwrap(),
        ),
        x1: SystemState::new(0.25, DVector::from_vec(vec![10.0, 150.0])),
        obs_times: (1..=100).map(|k| 0.25 * k as f64).collect(),
        data: None,
        defaults: RunDefaults {
            n_particles: 250,
            lambda: 3.0,
            tau: 1.0,
            dt_max: 0.1,
            data_seed: 102,
        },
    }
}

/// SIR epidemic fit to the bundled smallpox removal records: population
/// 120, one infective remaining just after the first removal (day 0), so
/// the initial state is 118 susceptibles and 1 infective. Observations
/// are daily error-free counts of susceptible + infective.
pub fn build_abakaliki() -> ExperimentBundle {
    let network = ReactionNetwork::new(
        vec!["susceptible".into(), "infective".into()],
        vec!["beta".into(), "gamma".into()],
        vec![
            Reaction::mass_action(vec![(0, 1), (1, 1)], vec![(1, 2)], 0),
            Reaction::mass_action(vec![(1, 1)], vec![], 1),
        ],
    )
    .expect("static model definition");
    let g = DMatrix::from_vec(2, 1, vec![1.0, 1.0]);
    let obs = ObservationModel::exact(g).expect("static model definition");
    let prior = PriorSpec::new(vec![
        ParamPrior::Gamma {
            shape: 10.0,
            rate: 1e4,
        },
        ParamPrior::Gamma {
            shape: 10.0,
            rate: 1e2,
        },
    ])
    .expect("static model definition");
    let data = abakaliki_dataset();
    ExperimentBundle {
        name: "abakaliki".into(),
        network,
        obs,
        prior,
        true_params: None,
        x1: SystemState::new(0.0, DVector::from_vec(vec![118.0, 1.0])),
        obs_times: data.times.clone(),
        data: Some(data),
        defaults: RunDefaults {
            n_particles: 2000,
            lambda: 1.1,
            tau: 5.0,
            dt_max: 0.1,
            data_seed: 0,
        },
    }
}

/// Removal records as (day, removals) pairs, parsed from the bundled CSV.
pub fn abakaliki_removals() -> Vec<(u32, u32)> {
    let raw = include_str!("../data/abakaliki.csv");
    raw.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split(',');
            let day = parts.next().unwrap().trim().parse().unwrap();
            let removals = parts.next().unwrap().trim().parse().unwrap();
            (day, removals)
        })
        .collect()
}

/// Expand the removal records to a full daily grid: days without a
/// removal carry the previous cumulative level, and the observed count is
/// the population (120) minus removals so far.
pub fn abakaliki_dataset() -> Dataset {
    const POPULATION: u32 = 120;
    let removals = abakaliki_removals();
    let last_day = removals.last().expect("non-empty records").0;
    let mut times = Vec::with_capacity(last_day as usize + 1);
    let mut observations = Vec::with_capacity(last_day as usize + 1);
    let mut cumulative = 0u32;
    let mut idx = 0usize;
    for day in 0..=last_day {
        if idx < removals.len() && removals[idx].0 == day {
            cumulative += removals[idx].1;
            idx += 1;
        }
        times.push(day as f64);
        observations.push(DVector::from_vec(vec![(POPULATION - cumulative) as f64]));
    }
    Dataset::new(times, observations).expect("static data")
}
