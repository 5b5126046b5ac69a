//! `revjump run`: builds the model and moves from a config, samples, and
//! writes the trace files.

use std::fs;
use std::path::{Path, PathBuf};

use revjump::models::toy::{DiscreteOffsetMap, DiscreteShiftedOffset, IndependenceMap};
use revjump::models::{ArModel, ChangePointModel, ConjugateMeanToy, DiscreteToy, MixtureModel};
use revjump::models::ar::ar_birth_move;
use revjump::models::changepoint::ChangePointBirthDeath;
use revjump::moves::autorj::autorj_move;
use revjump::moves::centering::ar_birth_closed_form;
use revjump::moves::jump::{DiscreteAux, NoAux, NormalAux};
use revjump::moves::mixture::SplitAux;
use revjump::moves::{AnnealedMove, BirthDeathMove, DelayedRejectionMove, JumpMove, Moments, SplitMergeMove};
use revjump::rng::auxiliary_rng;
use revjump::sampler::initial_state;
use revjump::{BetweenModelMove, Model, ModelSpace, MoveSet, SamplerConfig, Trace, WithinScales};
use serde::Serialize;

use crate::config::{MixtureSection, ModelKind, RunConfig, ToyJumpSection, ToySection, ToyVariant};
use crate::error::{CliError, CliResult};
use crate::io::{self, Dataset};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const OUTPUT_ROOT_VAR: &str = "REVJUMP_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";
const PILOT_PURPOSE: u64 = 0x9170;

/// Command-line overrides of the `[sampler]` table.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub iterations: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        let s = &mut config.sampler;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.replicates {
            s.replicates = v;
        }
        if let Some(v) = self.workers {
            s.workers = v;
        }
        if self.burn_in.is_some() {
            s.burn_in = self.burn_in;
        }
        if let Some(v) = self.thin {
            s.thin = v;
        }
        if let Some(v) = self.iterations {
            s.iterations = v;
        }
    }
}

enum Built {
    Mixture(MixtureModel, MoveSet<MixtureModel>),
    Ar(ArModel, MoveSet<ArModel>),
    Changepoint(ChangePointModel, MoveSet<ChangePointModel>),
    Discrete(DiscreteToy, MoveSet<DiscreteToy>),
    Conjugate(ConjugateMeanToy, MoveSet<ConjugateMeanToy>),
}

/// A model, its space and moves, ready to sample, with the config that
/// produced them and every default filled in.
pub struct Prepared {
    pub config: RunConfig,
    pub space: ModelSpace,
    built: Built,
}

fn load_data(config: &RunConfig, base: &Path) -> CliResult<(Option<PathBuf>, Dataset)> {
    match config.dataset_path(base) {
        Some(p) => {
            let abs = fs::canonicalize(&p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            let d = io::read_dataset(&abs)?;
            Ok((Some(abs), d))
        }
        None => Ok((None, Dataset::default())),
    }
}

fn toy_space(toy: &ToySection) -> ModelSpace {
    ModelSpace::from_weights(1, toy.model_prior.clone())
}

fn annealed<M: Model + ?Sized>(
    jump: JumpMove,
    config: &RunConfig,
    scales: &WithinScales,
) -> CliResult<Box<dyn BetweenModelMove<M>>> {
    Ok(match &config.moves.annealed {
        Some(a) => Box::new(AnnealedMove::new(jump, a.gamma, a.kappa, scales.clone())?),
        None => Box::new(jump),
    })
}

impl Prepared {
    /// Reads the dataset (relative paths resolve against `base`) and builds
    /// the sampler inputs.
    pub fn new(config: RunConfig, base: &Path) -> CliResult<Self> {
        config.validate()?;
        let mut config = config.with_default_moves();
        config.validate()?;
        let (dataset, data) = load_data(&config, base)?;
        config.dataset = dataset;
        let scales = config.sampler_config()?.within_scales;
        let (space, built) = match config.model {
            ModelKind::Mixture => {
                let hyper = config.mixture_hyper(&data.values);
                config.mixture = Some(MixtureSection {
                    delta: Some(hyper.delta),
                    xi: Some(hyper.xi),
                    kappa: Some(hyper.kappa),
                    alpha: Some(hyper.alpha),
                    beta: Some(hyper.beta),
                    k_max: Some(hyper.k_max),
                });
                let model = MixtureModel::new(data.values, hyper)?;
                let mut moves = MoveSet::new();
                if let Some(sm) = &config.moves.split_merge {
                    let aux = SplitAux {
                        u1: (sm.u1[0], sm.u1[1]),
                        u2: (sm.u2[0], sm.u2[1]),
                        u3: (sm.u3[0], sm.u3[1]),
                    };
                    moves.push(sm.weight, Box::new(SplitMergeMove::new(aux)));
                }
                if let Some(bd) = &config.moves.birth_death {
                    moves.push(bd.weight, Box::new(BirthDeathMove));
                }
                (model.space(), Built::Mixture(model, moves))
            }
            ModelKind::Ar => {
                let model = ArModel::new(data.values, config.ar_hyper())?;
                let section = config.ar.get_or_insert_with(Default::default);
                section.noise_scale = Some(model.noise_scale());
                let space = model.space();
                let mut moves: MoveSet<ArModel> = MoveSet::new();
                let k_max = model.hyper().k_max;
                if let Some(b) = config.moves.ar_birth.clone() {
                    for k in 1..k_max {
                        let sigma = b.scale.unwrap_or_else(|| {
                            ar_birth_closed_form(model.hyper().sigma_a, space.jump_prob(k, k + 1), space.jump_prob(k + 1, k))
                        });
                        let jump = ar_birth_move(&model, k, sigma)?;
                        moves.push(b.weight, annealed(jump, &config, &scales)?);
                    }
                }
                if let Some(a) = &config.moves.autorj {
                    let mut rng = auxiliary_rng(config.sampler.seed, PILOT_PURPOSE);
                    let mut moments = Vec::with_capacity(k_max);
                    for k in 1..=k_max {
                        let start = initial_state(&model, &space, k, &mut rng)?;
                        let s = scales.for_model(k, model.dimension(k));
                        moments.push(Moments::from_pilot(&model, start, a.pilot_iterations, &s, &mut rng)?);
                    }
                    for k in 1..k_max {
                        let jump = autorj_move(&model, k, &moments[k - 1], k + 1, &moments[k], None)?;
                        moves.push(a.weight, Box::new(jump));
                    }
                }
                (space, Built::Ar(model, moves))
            }
            ModelKind::Changepoint => {
                let horizon = data
                    .horizon
                    .ok_or_else(|| CliError::input("change-point dataset needs a `horizon T` line"))?;
                let model = ChangePointModel::new(data.values, horizon, config.changepoint_hyper())?;
                let section = config.changepoint.get_or_insert_with(Default::default);
                section.height_rate = Some(section.height_rate.unwrap_or(horizon / model.events().len().max(1) as f64));
                let mut moves = MoveSet::new();
                if let Some(w) = &config.moves.changepoint_birth {
                    moves.push(w.weight, Box::new(ChangePointBirthDeath));
                }
                (model.space(), Built::Changepoint(model, moves))
            }
            ModelKind::Toy => {
                let toy = config.toy.get_or_insert_with(Default::default).clone();
                let space = toy_space(&toy);
                let tj = config.moves.toy_jump.get_or_insert_with(ToyJumpSection::default);
                match toy.variant {
                    ToyVariant::Discrete => {
                        let model = DiscreteToy::standard(toy.mass_ratio);
                        let m = model.values();
                        let aux = tj.aux.get_or_insert_with(|| vec![1.0 / m as f64; m]).clone();
                        if aux.len() != m {
                            return Err(CliError::config(format!("moves.toy_jump.aux: {m} probabilities expected")));
                        }
                        let weight = tj.weight;
                        let jump = JumpMove::new(&model, DiscreteOffsetMap { m }, DiscreteAux::new(aux)?, NoAux)?;
                        let mut moves: MoveSet<DiscreteToy> = MoveSet::new();
                        match &config.moves.delayed_rejection {
                            Some(dr) => {
                                if dr.stage2_aux.len() != m {
                                    return Err(CliError::config(format!("moves.delayed_rejection.stage2_aux: {m} probabilities expected")));
                                }
                                let mv = DelayedRejectionMove::new(&model, jump, DiscreteShiftedOffset { m }, DiscreteAux::new(dr.stage2_aux.clone())?)?;
                                moves.push(weight, Box::new(mv));
                            }
                            None => moves.push(weight, annealed(jump, &config, &scales)?),
                        }
                        (space, Built::Discrete(model, moves))
                    }
                    ToyVariant::Conjugate => {
                        if data.values.is_empty() {
                            return Err(CliError::input("conjugate toy needs at least one observation"));
                        }
                        let model = ConjugateMeanToy::new(data.values, toy.tau)?;
                        let (pm, ps) = model.posterior_mean_sd();
                        let mean = *tj.mean.get_or_insert(pm);
                        let sd = *tj.sd.get_or_insert(ps);
                        let weight = tj.weight;
                        let jump = JumpMove::new(&model, IndependenceMap, NormalAux { mean, sd }, NoAux)?;
                        let mut moves: MoveSet<ConjugateMeanToy> = MoveSet::new();
                        moves.push(weight, annealed(jump, &config, &scales)?);
                        (space, Built::Conjugate(model, moves))
                    }
                }
            }
        };
        config.sampler.start_model = Some(config.sampler.start_model.unwrap_or(space.first()));
        config.sampler.burn_in = Some(config.sampler.burn_in.unwrap_or(config.sampler.iterations / 10));
        config.validate()?;
        Ok(Prepared { config, space, built })
    }

    pub fn sample(&self) -> CliResult<Trace> {
        let c = self.config.sampler_config()?;
        let s = &self.space;
        Ok(match &self.built {
            Built::Mixture(m, mv) => revjump::run_sampler(m, s, mv, &c)?,
            Built::Ar(m, mv) => revjump::run_sampler(m, s, mv, &c)?,
            Built::Changepoint(m, mv) => revjump::run_sampler(m, s, mv, &c)?,
            Built::Discrete(m, mv) => revjump::run_sampler(m, s, mv, &c)?,
            Built::Conjugate(m, mv) => revjump::run_sampler(m, s, mv, &c)?,
        })
    }

    pub fn param_labels(&self, k: usize) -> Vec<(&'static str, usize)> {
        match &self.built {
            Built::Mixture(m, _) => m.param_labels(k),
            Built::Ar(m, _) => m.param_labels(k),
            Built::Changepoint(m, _) => m.param_labels(k),
            Built::Discrete(m, _) => m.param_labels(k),
            Built::Conjugate(m, _) => m.param_labels(k),
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        self.config.sampler_config().expect("validated")
    }

    /// Writes `resolved_config.toml` and the per-replicate CSVs into `dir`,
    /// removing trace files left by an earlier run.
    pub fn write(&self, trace: &Trace, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir)?;
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let ours = ["trace_", "params_", "attempts_"].iter().any(|pre| name.starts_with(pre)) && name.ends_with(".csv");
            if ours {
                fs::remove_file(&p)?;
            }
        }
        fs::write(dir.join(RESOLVED_CONFIG), self.config.to_toml())?;
        let labels = |k: usize| self.param_labels(k);
        for rep in &trace.replicates {
            io::write_replicate(dir, rep, self.config.sampler.record_params, &labels)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelVisit {
    pub model: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub output: PathBuf,
    pub model: ModelKind,
    pub replicates: usize,
    pub iterations: u64,
    pub samples_per_replicate: usize,
    pub between_model_attempts: usize,
    /// Post burn-in acceptance rate of the between-model moves.
    pub acceptance_rate: Option<f64>,
    pub visits: Vec<ModelVisit>,
}

impl RunSummary {
    fn new(prepared: &Prepared, trace: &Trace, output: PathBuf) -> Self {
        let space = &prepared.space;
        let mut counts = vec![0usize; space.last() - space.first() + 1];
        let mut total = 0usize;
        for s in trace.replicates.iter().flat_map(|r| &r.samples) {
            counts[s.model - space.first()] += 1;
            total += 1;
        }
        let post: Vec<_> = trace.attempts().filter(|a| !a.burn_in).collect();
        let accepted = post.iter().filter(|a| a.accepted).count();
        RunSummary {
            output,
            model: prepared.config.model,
            replicates: trace.replicates.len(),
            iterations: prepared.config.sampler.iterations,
            samples_per_replicate: trace.replicates.first().map_or(0, |r| r.samples.len()),
            between_model_attempts: trace.attempts().count(),
            acceptance_rate: (!post.is_empty()).then(|| accepted as f64 / post.len() as f64),
            visits: space
                .indices()
                .zip(counts)
                .filter(|(_, c)| *c > 0)
                .map(|(model, c)| ModelVisit {
                    model,
                    fraction: c as f64 / total as f64,
                })
                .collect(),
        }
    }
}

/// `--out`, else the config's `output` (relative to the config file), else
/// `$REVJUMP_OUTPUT_ROOT/<config stem>`.
pub fn output_dir(config: &RunConfig, config_path: &Path, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    if let Some(o) = &config.output {
        return if o.is_absolute() { o.clone() } else { base.join(o) };
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
    let stem = config_path.file_stem().map_or_else(|| "run".into(), |s| s.to_os_string());
    root.join(stem)
}

pub fn run(config_path: &Path, out: Option<&Path>, overrides: &Overrides) -> CliResult<RunSummary> {
    let mut config = RunConfig::load(config_path)?;
    overrides.apply(&mut config);
    let dir = output_dir(&config, config_path, out);
    let base = config_path.parent().unwrap_or(Path::new("."));
    let prepared = Prepared::new(config, base)?;
    let trace = prepared.sample()?;
    prepared.write(&trace, &dir)?;
    Ok(RunSummary::new(&prepared, &trace, dir))
}
