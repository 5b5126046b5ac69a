//! The top-level run loop over replicate chains.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RjError};
use crate::kernel::{rj_between_model_step, AttemptRecord, MoveSet};
use crate::model::{ChainState, Model};
use crate::rng::{replicate_rng, ChainRng};
use crate::space::ModelSpace;

const PRIOR_START_ATTEMPTS: usize = 1000;

/// Random-walk proposal scales for the within-model updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WithinScales {
    /// Scale used for every coordinate of models without an explicit entry.
    pub default: f64,
    #[serde(default)]
    pub per_model: BTreeMap<usize, Vec<f64>>,
}

impl Default for WithinScales {
    fn default() -> Self {
        WithinScales {
            default: 0.1,
            per_model: BTreeMap::new(),
        }
    }
}

impl WithinScales {
    pub fn uniform(scale: f64) -> Self {
        WithinScales {
            default: scale,
            per_model: BTreeMap::new(),
        }
    }

    pub fn with_model(mut self, k: usize, scales: Vec<f64>) -> Self {
        self.per_model.insert(k, scales);
        self
    }

    pub fn for_model(&self, k: usize, dimension: usize) -> Vec<f64> {
        match self.per_model.get(&k) {
            Some(s) => s.clone(),
            None => vec![self.default; dimension],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub replicates: usize,
    pub seed: u64,
    pub between_move_probability: f64,
    /// Model whose prior supplies the initial state; defaults to the first.
    pub start_model: Option<usize>,
    pub within_scales: WithinScales,
    /// Worker threads for the replicate pool; `None` uses every processor.
    pub workers: Option<usize>,
    /// Store `θ_k` with every retained sample.
    pub record_params: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 10_000,
            burn_in: 1_000,
            thin: 1,
            replicates: 1,
            seed: 1,
            between_move_probability: 0.5,
            start_model: None,
            within_scales: WithinScales::default(),
            workers: None,
            record_params: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(RjError::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return fail("iterations must be positive");
        }
        if self.burn_in >= self.iterations {
            return fail("burn_in must be smaller than iterations");
        }
        if self.thin == 0 {
            return fail("thin must be at least 1");
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.between_move_probability) {
            return fail("between_move_probability must lie in [0, 1]");
        }
        if !(self.within_scales.default > 0.0) {
            return fail("within_scales.default must be positive");
        }
        if self.within_scales.per_model.values().flatten().any(|s| !(*s > 0.0)) {
            return fail("within_scales entries must be positive");
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1");
        }
        Ok(())
    }
}

/// One retained state.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub iteration: u64,
    pub model: usize,
    /// Empty unless the run records parameters.
    pub params: Vec<f64>,
    pub log_likelihood: f64,
    pub log_prior: f64,
    pub deviance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplicateTrace {
    pub replicate: usize,
    pub samples: Vec<TraceSample>,
    /// Every between-model attempt, burn-in included and flagged.
    pub attempts: Vec<AttemptRecord>,
}

impl ReplicateTrace {
    pub fn models(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.model).collect()
    }

    pub fn deviances(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.deviance).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub replicates: Vec<ReplicateTrace>,
}

impl Trace {
    pub fn model_sequences(&self) -> Vec<Vec<usize>> {
        self.replicates.iter().map(|r| r.models()).collect()
    }

    pub fn attempts(&self) -> impl Iterator<Item = &AttemptRecord> {
        self.replicates.iter().flat_map(|r| r.attempts.iter())
    }
}

/// Draws the initial state from the prior of model `k`, retrying a bounded
/// number of times when the draw has a non-finite density.
pub fn initial_state<M: Model + ?Sized>(model: &M, space: &ModelSpace, k: usize, rng: &mut ChainRng) -> Result<ChainState> {
    if !space.contains(k) {
        return Err(RjError::UnknownModel(k));
    }
    for _ in 0..PRIOR_START_ATTEMPTS {
        let (params, latent) = model.sample_prior(k, rng);
        let state = ChainState::evaluate(model, k, params, latent).map_err(|_| RjError::Startup { model: k })?;
        if state.is_finite() {
            return Ok(state);
        }
    }
    Err(RjError::Startup { model: k })
}

/// Runs one replicate chain from `start`.
pub fn run_chain<M: Model + ?Sized>(
    model: &M,
    space: &ModelSpace,
    moves: &MoveSet<M>,
    config: &SamplerConfig,
    replicate: usize,
    start: ChainState,
    rng: &mut ChainRng,
) -> Result<ReplicateTrace> {
    let mut state = start;
    let mut trace = ReplicateTrace {
        replicate,
        ..Default::default()
    };
    let retained = (config.iterations - config.burn_in) / config.thin;
    trace.samples.reserve(retained as usize);
    let mut scales: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for t in 1..=config.iterations {
        let k = state.model;
        let s = scales
            .entry(k)
            .or_insert_with(|| config.within_scales.for_model(k, model.dimension(k)));
        state = model.within_model_step(state, s, rng)?;
        if config.between_move_probability > 0.0 && rng.random::<f64>() < config.between_move_probability {
            let (next, record) = rj_between_model_step(model, space, moves, state, rng)?;
            state = next;
            if let Some((from, to, alpha, accepted)) = record {
                trace.attempts.push(AttemptRecord {
                    iteration: t,
                    from,
                    to,
                    alpha,
                    accepted,
                    burn_in: t <= config.burn_in,
                });
            }
        }
        if t > config.burn_in && (t - config.burn_in) % config.thin == 0 {
            trace.samples.push(TraceSample {
                iteration: t,
                model: state.model,
                params: if config.record_params { state.params.clone() } else { Vec::new() },
                log_likelihood: state.log_likelihood,
                log_prior: state.log_prior,
                deviance: model.deviance(&state),
            });
        }
    }
    Ok(trace)
}

/// Runs `config.replicates` independent chains, each on its own RNG stream,
/// in parallel. The result does not depend on the number of workers.
pub fn run_sampler<M: Model + ?Sized>(
    model: &M,
    space: &ModelSpace,
    moves: &MoveSet<M>,
    config: &SamplerConfig,
) -> Result<Trace> {
    config.validate()?;
    let start = config.start_model.unwrap_or(space.first());
    if !space.contains(start) {
        return Err(RjError::UnknownModel(start));
    }
    let one = |r: usize| -> Result<ReplicateTrace> {
        let mut rng = replicate_rng(config.seed, r as u64);
        let init = initial_state(model, space, start, &mut rng)?;
        run_chain(model, space, moves, config, r, init, &mut rng)
    };
    let run = || -> Result<Vec<ReplicateTrace>> { (0..config.replicates).into_par_iter().map(one).collect() };
    let replicates = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RjError::InvalidConfig(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(Trace { replicates })
}
