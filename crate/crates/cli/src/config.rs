//! Run configuration: TOML input, validation and the fully resolved echo.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use revjump::models::{ArHyper, ChangePointHyper, MixtureHyper};
use revjump::{SamplerConfig, WithinScales};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mixture,
    Ar,
    Changepoint,
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyVariant {
    Discrete,
    Conjugate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar: Option<ArSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changepoint: Option<ChangePointSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<ToySection>,
    #[serde(default)]
    pub moves: MovesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSection {
    pub iterations: u64,
    /// Defaults to a tenth of `iterations`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    pub thin: u64,
    pub replicates: usize,
    pub seed: u64,
    pub between_move_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_model: Option<usize>,
    /// 0 runs one worker per processor.
    pub workers: usize,
    pub record_params: bool,
    pub within_scales: ScalesSection,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSection {
            iterations: d.iterations,
            burn_in: None,
            thin: d.thin,
            replicates: d.replicates,
            seed: d.seed,
            between_move_probability: d.between_move_probability,
            start_model: None,
            workers: 0,
            record_params: true,
            within_scales: ScalesSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalesSection {
    pub default: f64,
    /// Keyed by model index.
    pub per_model: BTreeMap<String, Vec<f64>>,
}

impl Default for ScalesSection {
    fn default() -> Self {
        ScalesSection {
            default: WithinScales::default().default,
            per_model: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArSection {
    pub k_max: usize,
    pub sigma_a: f64,
    pub noise_shape: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
}

impl Default for ArSection {
    fn default() -> Self {
        let h = ArHyper::default();
        ArSection {
            k_max: h.k_max,
            sigma_a: h.sigma_a,
            noise_shape: h.noise_shape,
            noise_scale: h.noise_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChangePointSection {
    pub k_max: usize,
    pub poisson_rate: f64,
    pub height_shape: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_rate: Option<f64>,
}

impl Default for ChangePointSection {
    fn default() -> Self {
        let h = ChangePointHyper::default();
        ChangePointSection {
            k_max: h.k_max,
            poisson_rate: h.poisson_rate,
            height_shape: h.height_shape,
            height_rate: h.height_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySection {
    pub variant: ToyVariant,
    /// Discrete toy: total weight of model 2 relative to model 1.
    pub mass_ratio: f64,
    /// Conjugate toy: prior sd of the mean.
    pub tau: f64,
    /// Unnormalised prior weights of models 1 and 2.
    pub model_prior: Vec<f64>,
}

impl Default for ToySection {
    fn default() -> Self {
        ToySection {
            variant: ToyVariant::Discrete,
            mass_ratio: 1.0,
            tau: 1.0,
            model_prior: vec![1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightSection {
    pub weight: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        WeightSection { weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitMergeSection {
    pub weight: f64,
    /// Beta parameters of the three split variables.
    pub u1: [f64; 2],
    pub u2: [f64; 2],
    pub u3: [f64; 2],
}

impl Default for SplitMergeSection {
    fn default() -> Self {
        SplitMergeSection {
            weight: 1.0,
            u1: [2.0, 2.0],
            u2: [2.0, 2.0],
            u3: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArBirthSection {
    pub weight: f64,
    /// Fixed proposal sd of the new coefficient. Absent: the centred
    /// closed-form value for each order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl Default for ArBirthSection {
    fn default() -> Self {
        ArBirthSection { weight: 1.0, scale: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyJumpSection {
    pub weight: f64,
    /// Discrete toy: law of the offset on `0..m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<Vec<f64>>,
    /// Conjugate toy: normal proposal for the new mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl Default for ToyJumpSection {
    fn default() -> Self {
        ToyJumpSection {
            weight: 1.0,
            aux: None,
            mean: None,
            sd: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayedRejectionSection {
    pub stage2_aux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealedSection {
    pub gamma: f64,
    pub kappa: usize,
}

impl Default for AnnealedSection {
    fn default() -> Self {
        AnnealedSection { gamma: 2.0, kappa: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoRjSection {
    pub weight: f64,
    pub pilot_iterations: usize,
}

impl Default for AutoRjSection {
    fn default() -> Self {
        AutoRjSection {
            weight: 1.0,
            pilot_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MovesSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_merge: Option<SplitMergeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub birth_death: Option<WeightSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ar_birth: Option<ArBirthSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub autorj: Option<AutoRjSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changepoint_birth: Option<WeightSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toy_jump: Option<ToyJumpSection>,
    /// Turns the toy jump into the first stage of a two-stage move.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delayed_rejection: Option<DelayedRejectionSection>,
    /// Wraps the base jump (toy jump or AR birth) in tempered steps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annealed: Option<AnnealedSection>,
}

impl MovesSection {
    fn is_empty(&self) -> bool {
        *self == MovesSection::default()
    }

    fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut add = |present: bool, name| {
            if present {
                v.push(name)
            }
        };
        add(self.split_merge.is_some(), "split_merge");
        add(self.birth_death.is_some(), "birth_death");
        add(self.ar_birth.is_some(), "ar_birth");
        add(self.autorj.is_some(), "autorj");
        add(self.changepoint_birth.is_some(), "changepoint_birth");
        add(self.toy_jump.is_some(), "toy_jump");
        add(self.delayed_rejection.is_some(), "delayed_rejection");
        add(self.annealed.is_some(), "annealed");
        v
    }
}

/// Paths present in `input` but absent from `known`, dotted.
fn unknown_keys(input: &toml::Value, known: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    let (toml::Value::Table(a), toml::Value::Table(b)) = (input, known) else {
        return;
    };
    for (key, value) in a {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match b.get(key) {
            None => out.push(path),
            Some(k) => unknown_keys(value, k, &path, out),
        }
    }
}

impl RunConfig {
    /// Parses and validates the TOML text. Unknown keys are an error.
    pub fn parse(text: &str) -> CliResult<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| CliError::config(e.message().to_string() + &location(&e, text)))?;
        let config: RunConfig = RunConfig::deserialize(value.clone()).map_err(|e| CliError::config(e.message().to_string()))?;
        let known = toml::Value::try_from(&config).map_err(|e| CliError::config(e.to_string()))?;
        let mut unknown = Vec::new();
        unknown_keys(&value, &known, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(CliError::config(format!("unknown keys: {}", unknown.join(", "))));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> CliResult<()> {
        let s = &self.sampler;
        self.sampler_config()?.validate().map_err(|e| CliError::config(format!("sampler: {e}")))?;
        for (k, scales) in &s.within_scales.per_model {
            if k.parse::<usize>().is_err() {
                return Err(CliError::config(format!("sampler.within_scales.per_model.{k}: not a model index")));
            }
            if scales.iter().any(|x| !(*x > 0.0)) {
                return Err(CliError::config(format!("sampler.within_scales.per_model.{k}: scales must be positive")));
            }
        }
        let sections = [
            ("mixture", self.mixture.is_some(), ModelKind::Mixture),
            ("ar", self.ar.is_some(), ModelKind::Ar),
            ("changepoint", self.changepoint.is_some(), ModelKind::Changepoint),
            ("toy", self.toy.is_some(), ModelKind::Toy),
        ];
        for (name, present, kind) in sections {
            if present && kind != self.model {
                return Err(CliError::config(format!("[{name}] given for model = {:?}", self.model).to_lowercase()));
            }
        }
        let variant = self.toy.as_ref().map(|t| t.variant);
        let allowed: &[&str] = match (self.model, variant) {
            (ModelKind::Mixture, _) => &["split_merge", "birth_death"],
            (ModelKind::Ar, _) => &["ar_birth", "autorj", "annealed"],
            (ModelKind::Changepoint, _) => &["changepoint_birth"],
            (ModelKind::Toy, Some(ToyVariant::Conjugate)) => &["toy_jump", "annealed"],
            (ModelKind::Toy, _) => &["toy_jump", "delayed_rejection", "annealed"],
        };
        let moves = &self.moves;
        for name in moves.names() {
            if !allowed.contains(&name) {
                return Err(CliError::config(format!("moves.{name}: not available for this model")));
            }
        }
        if moves.annealed.is_some() && moves.delayed_rejection.is_some() {
            return Err(CliError::config("moves.annealed: cannot be combined with delayed_rejection"));
        }
        if moves.delayed_rejection.is_some() && moves.toy_jump.is_none() {
            return Err(CliError::config("moves.delayed_rejection: needs moves.toy_jump as its first stage"));
        }
        let weights = [
            ("split_merge", moves.split_merge.as_ref().map(|m| m.weight)),
            ("birth_death", moves.birth_death.as_ref().map(|m| m.weight)),
            ("ar_birth", moves.ar_birth.as_ref().map(|m| m.weight)),
            ("autorj", moves.autorj.as_ref().map(|m| m.weight)),
            ("changepoint_birth", moves.changepoint_birth.as_ref().map(|m| m.weight)),
            ("toy_jump", moves.toy_jump.as_ref().map(|m| m.weight)),
        ];
        for (name, w) in weights {
            if let Some(w) = w {
                if !(w > 0.0) || !w.is_finite() {
                    return Err(CliError::config(format!("moves.{name}.weight: must be positive")));
                }
            }
        }
        if let Some(sm) = &moves.split_merge {
            if sm.u1.iter().chain(&sm.u2).chain(&sm.u3).any(|x| !(*x > 0.0)) {
                return Err(CliError::config("moves.split_merge: beta parameters must be positive"));
            }
        }
        if let Some(s) = moves.ar_birth.as_ref().and_then(|m| m.scale) {
            if !(s > 0.0) {
                return Err(CliError::config("moves.ar_birth.scale: must be positive"));
            }
        }
        if let Some(a) = &moves.annealed {
            if !(a.gamma >= 0.0) || !a.gamma.is_finite() {
                return Err(CliError::config("moves.annealed.gamma: must be non-negative"));
            }
        }
        if let Some(a) = &moves.autorj {
            if a.pilot_iterations < 2 {
                return Err(CliError::config("moves.autorj.pilot_iterations: must be at least 2"));
            }
        }
        if let Some(t) = &self.toy {
            if t.model_prior.len() != 2 || t.model_prior.iter().any(|w| !(*w > 0.0)) {
                return Err(CliError::config("toy.model_prior: two positive weights expected"));
            }
            if !(t.mass_ratio > 0.0) || !(t.tau > 0.0) {
                return Err(CliError::config("toy: mass_ratio and tau must be positive"));
            }
        }
        if let Some(tj) = &moves.toy_jump {
            if tj.sd.is_some_and(|s| !(s > 0.0)) {
                return Err(CliError::config("moves.toy_jump.sd: must be positive"));
            }
        }
        let needs_data = !matches!((self.model, variant), (ModelKind::Toy, None | Some(ToyVariant::Discrete)));
        if needs_data && self.dataset.is_none() {
            return Err(CliError::config("dataset: required for this model"));
        }
        Ok(())
    }

    /// Core sampler settings. `workers = 0` maps to every processor.
    pub fn sampler_config(&self) -> CliResult<SamplerConfig> {
        let s = &self.sampler;
        let mut scales = WithinScales::uniform(s.within_scales.default);
        for (k, v) in &s.within_scales.per_model {
            let k = k
                .parse::<usize>()
                .map_err(|_| CliError::config(format!("sampler.within_scales.per_model.{k}: not a model index")))?;
            scales = scales.with_model(k, v.clone());
        }
        Ok(SamplerConfig {
            iterations: s.iterations,
            burn_in: s.burn_in.unwrap_or(s.iterations / 10),
            thin: s.thin,
            replicates: s.replicates,
            seed: s.seed,
            between_move_probability: s.between_move_probability,
            start_model: s.start_model,
            within_scales: scales,
            workers: (s.workers > 0).then_some(s.workers),
            record_params: s.record_params,
        })
    }

    pub fn toy_variant(&self) -> ToyVariant {
        self.toy.as_ref().map_or(ToyVariant::Discrete, |t| t.variant)
    }

    /// Dataset path relative to `base` when not absolute.
    pub fn dataset_path(&self, base: &Path) -> Option<PathBuf> {
        self.dataset.as_ref().map(|d| if d.is_absolute() { d.clone() } else { base.join(d) })
    }

    /// Fills in the default move set when none is given.
    pub fn with_default_moves(mut self) -> Self {
        if self.moves.is_empty() {
            self.moves = match self.model {
                ModelKind::Mixture => MovesSection {
                    split_merge: Some(SplitMergeSection::default()),
                    birth_death: Some(WeightSection::default()),
                    ..Default::default()
                },
                ModelKind::Ar => MovesSection {
                    ar_birth: Some(ArBirthSection::default()),
                    ..Default::default()
                },
                ModelKind::Changepoint => MovesSection {
                    changepoint_birth: Some(WeightSection::default()),
                    ..Default::default()
                },
                ModelKind::Toy => MovesSection {
                    toy_jump: Some(ToyJumpSection::default()),
                    ..Default::default()
                },
            };
        } else if self.moves.annealed.is_some() && self.moves.toy_jump.is_none() && self.moves.ar_birth.is_none() {
            match self.model {
                ModelKind::Ar => self.moves.ar_birth = Some(ArBirthSection::default()),
                _ => self.moves.toy_jump = Some(ToyJumpSection::default()),
            }
        }
        self
    }

    pub fn mixture_hyper(&self, data: &[f64]) -> MixtureHyper {
        let d = MixtureHyper::from_data(data);
        let s = self.mixture.clone().unwrap_or_default();
        MixtureHyper {
            delta: s.delta.unwrap_or(d.delta),
            xi: s.xi.unwrap_or(d.xi),
            kappa: s.kappa.unwrap_or(d.kappa),
            alpha: s.alpha.unwrap_or(d.alpha),
            beta: s.beta.unwrap_or(d.beta),
            k_max: s.k_max.unwrap_or(d.k_max),
        }
    }

    pub fn ar_hyper(&self) -> ArHyper {
        let s = self.ar.clone().unwrap_or_default();
        ArHyper {
            k_max: s.k_max,
            sigma_a: s.sigma_a,
            noise_shape: s.noise_shape,
            noise_scale: s.noise_scale,
        }
    }

    pub fn changepoint_hyper(&self) -> ChangePointHyper {
        let s = self.changepoint.clone().unwrap_or_default();
        ChangePointHyper {
            k_max: s.k_max,
            poisson_rate: s.poisson_rate,
            height_shape: s.height_shape,
            height_rate: s.height_rate,
        }
    }
}

fn location(e: &toml::de::Error, text: &str) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
