//! `revjump estimate`: posterior model probabilities and Bayes factors.

use std::path::PathBuf;

use revjump::estimation::{bayes_factor_bridge, bayes_factor_visits, posterior_model_probs, BayesFactor, ModelProbabilities};
use revjump::{ModelSpace, ReplicateTrace, RjError};
use serde::Serialize;

use crate::config::{ModelKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io;

pub const ESTIMATES_JSON: &str = "estimates.json";

#[derive(Debug, Clone, Default)]
pub struct EstimateOptions {
    pub inputs: Vec<PathBuf>,
    /// Samples at iterations up to this value are dropped.
    pub burn_in: u64,
    /// Use between-model attempts made during burn-in in the bridge estimate.
    pub include_burn_in_attempts: bool,
    pub out: Option<PathBuf>,
}

/// An estimate, or why it could not be formed.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Estimate {
    Available { value: f64, std_error: f64 },
    Unavailable { reason: String },
}

impl Estimate {
    fn from(r: Result<BayesFactor, RjError>) -> Self {
        match r {
            Ok(b) if b.value.is_finite() => Estimate::Available {
                value: b.value,
                std_error: b.std_error,
            },
            Ok(_) => Estimate::Unavailable {
                reason: "non-finite estimate".into(),
            },
            Err(e) => Estimate::Unavailable { reason: e.to_string() },
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Estimate::Available { value, .. } => Some(*value),
            Estimate::Unavailable { .. } => None,
        }
    }

    pub fn std_error(&self) -> Option<f64> {
        match self {
            Estimate::Available { std_error, .. } => Some(*std_error),
            Estimate::Unavailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BayesFactorRow {
    pub numerator: usize,
    pub denominator: usize,
    pub visits: Estimate,
    /// Ratio of mean acceptance probabilities.
    pub bridge_raw: Estimate,
    /// `bridge_raw` times the model prior and jump probability ratio.
    pub bridge_corrected: Estimate,
    /// Attempts `denominator → numerator`.
    pub forward_attempts: usize,
    /// Attempts `numerator → denominator`.
    pub reverse_attempts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatesReport {
    pub inputs: Vec<PathBuf>,
    pub replicates: usize,
    pub probabilities: ModelProbabilities,
    pub bayes_factors: Vec<BayesFactorRow>,
    pub warnings: Vec<String>,
}

/// Model space of a resolved configuration.
pub fn model_space(config: &RunConfig) -> CliResult<ModelSpace> {
    let missing = |what: &str| CliError::config(format!("resolved config lacks {what}"));
    Ok(match config.model {
        ModelKind::Mixture => {
            let k_max = config.mixture.as_ref().and_then(|m| m.k_max).ok_or_else(|| missing("mixture.k_max"))?;
            ModelSpace::uniform(1, k_max)
        }
        ModelKind::Ar => ModelSpace::uniform(1, config.ar_hyper().k_max),
        ModelKind::Changepoint => {
            let h = config.changepoint_hyper();
            ModelSpace::truncated_poisson(0, h.k_max, h.poisson_rate)
        }
        ModelKind::Toy => ModelSpace::from_weights(1, config.toy.clone().unwrap_or_default().model_prior),
    })
}

pub fn estimate_traces(mut chains: Vec<ReplicateTrace>, space: &ModelSpace, options: &EstimateOptions) -> CliResult<EstimatesReport> {
    for c in &mut chains {
        c.samples.retain(|s| s.iteration > options.burn_in);
    }
    if chains.iter().any(|c| c.samples.is_empty()) {
        return Err(CliError::input("no samples left after burn-in"));
    }
    let sequences: Vec<Vec<usize>> = chains.iter().map(|c| c.models()).collect();
    let probabilities = posterior_model_probs(&sequences, 0)?;
    let attempts: Vec<_> = chains.iter().flat_map(|c| c.attempts.iter().copied()).collect();
    let visited: Vec<usize> = probabilities.models.iter().filter(|m| m.visits > 0).map(|m| m.model).collect();
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for pair in visited.windows(2) {
        let (den, num) = (pair[0], pair[1]);
        if num != den + 1 {
            continue;
        }
        let raw = bayes_factor_bridge(&attempts, num, den, options.include_burn_in_attempts, None);
        let corrected = bayes_factor_bridge(&attempts, num, den, options.include_burn_in_attempts, Some(space));
        let count = |from: usize, to: usize| {
            attempts
                .iter()
                .filter(|a| a.from == from && a.to == to && (options.include_burn_in_attempts || !a.burn_in))
                .count()
        };
        rows.push(BayesFactorRow {
            numerator: num,
            denominator: den,
            visits: Estimate::from(bayes_factor_visits(&probabilities, num, den, space)),
            bridge_raw: Estimate::from(raw.map(|b| b.factor)),
            bridge_corrected: Estimate::from(corrected.map(|b| b.factor)),
            forward_attempts: count(den, num),
            reverse_attempts: count(num, den),
        });
    }
    if rows.is_empty() {
        warnings.push("fewer than two adjacent models were visited: no Bayes factors".into());
    }
    if chains.iter().all(|c| c.attempts.is_empty()) {
        warnings.push("no attempt records: bridge estimates unavailable".into());
    }
    Ok(EstimatesReport {
        inputs: options.inputs.clone(),
        replicates: chains.len(),
        probabilities,
        bayes_factors: rows,
        warnings,
    })
}

pub fn estimate(options: &EstimateOptions) -> CliResult<EstimatesReport> {
    if options.inputs.is_empty() {
        return Err(CliError::input("no inputs given"));
    }
    let config_path = io::run_config_path(&options.inputs)
        .ok_or_else(|| CliError::input(format!("{} not found next to the traces", crate::run::RESOLVED_CONFIG)))?;
    let space = model_space(&RunConfig::load(&config_path)?)?;
    let files = io::trace_files(&options.inputs)?;
    let chains = files.iter().map(|f| io::read_replicate(f)).collect::<CliResult<Vec<_>>>()?;
    let report = estimate_traces(chains, &space, options)?;
    let out = options.out.clone().unwrap_or_else(|| crate::diagnose::default_out(&options.inputs));
    std::fs::create_dir_all(&out)?;
    io::write_json(&out.join(ESTIMATES_JSON), &report)?;
    Ok(report)
}
