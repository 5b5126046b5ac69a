//! Posterior model probabilities and Bayes factors from sampler output.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RjError};
use crate::kernel::AttemptRecord;
use crate::space::ModelSpace;
use crate::stats::{batch_means_se, mean};

pub const DEFAULT_BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProbability {
    pub model: usize,
    pub probability: f64,
    pub std_error: f64,
    pub visits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProbabilities {
    pub models: Vec<ModelProbability>,
    pub samples: usize,
    #[serde(skip)]
    sequences: Vec<Vec<usize>>,
}

impl ModelProbabilities {
    pub fn get(&self, k: usize) -> Option<&ModelProbability> {
        self.models.iter().find(|m| m.model == k)
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.get(k).map_or(0.0, |m| m.probability)
    }

    /// Batch-means standard error of the pooled mean of a per-sample
    /// function, combining replicates by their share of the samples.
    fn pooled_se(&self, f: impl Fn(usize) -> f64) -> f64 {
        let total = self.samples as f64;
        self.sequences
            .iter()
            .map(|s| {
                let v: Vec<f64> = s.iter().map(|&k| f(k)).collect();
                let se = batch_means_se(&v, DEFAULT_BATCHES);
                let share = s.len() as f64 / total;
                if se.is_finite() {
                    (share * se).powi(2)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Visit frequencies of each model after dropping `burn_in` leading samples
/// from every replicate.
pub fn posterior_model_probs(sequences: &[Vec<usize>], burn_in: usize) -> Result<ModelProbabilities> {
    if sequences.is_empty() {
        return Err(RjError::InsufficientData("no replicates".into()));
    }
    let kept: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| {
            if burn_in >= s.len() {
                Err(RjError::InsufficientData(format!(
                    "burn-in of {burn_in} samples leaves nothing of a trace of length {}",
                    s.len()
                )))
            } else {
                Ok(s[burn_in..].to_vec())
            }
        })
        .collect::<Result<_>>()?;
    let samples: usize = kept.iter().map(Vec::len).sum();
    let mut models: Vec<usize> = kept.iter().flatten().copied().collect();
    models.sort_unstable();
    models.dedup();
    let mut out = ModelProbabilities {
        models: Vec::new(),
        samples,
        sequences: kept,
    };
    for k in models {
        let visits = out.sequences.iter().flatten().filter(|&&m| m == k).count();
        let se = out.pooled_se(|m| if m == k { 1.0 } else { 0.0 });
        out.models.push(ModelProbability {
            model: k,
            probability: visits as f64 / samples as f64,
            std_error: se,
            visits,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    /// Evidence of `numerator` over `denominator`.
    pub numerator: usize,
    pub denominator: usize,
    pub value: f64,
    pub std_error: f64,
}

/// `B̂_{k′,k} = (p̂(k′|x) / p̂(k|x)) · (p(k) / p(k′))`.
pub fn bayes_factor_visits(probs: &ModelProbabilities, numerator: usize, denominator: usize, space: &ModelSpace) -> Result<BayesFactor> {
    let (pn, pd) = (probs.probability(numerator), probs.probability(denominator));
    if pn == 0.0 || pd == 0.0 {
        let never = if pn == 0.0 { numerator } else { denominator };
        return Err(RjError::UndefinedEstimate(format!("model {never} was never visited")));
    }
    let prior_odds = space.model_prior(denominator) / space.model_prior(numerator);
    if !prior_odds.is_finite() || prior_odds <= 0.0 {
        return Err(RjError::UndefinedEstimate("model prior is zero for one of the models".into()));
    }
    let value = pn / pd * prior_odds;
    let se_log = probs.pooled_se(|m| {
        (if m == numerator { 1.0 / pn } else { 0.0 }) - (if m == denominator { 1.0 / pd } else { 0.0 })
    });
    Ok(BayesFactor {
        numerator,
        denominator,
        value,
        std_error: value * se_log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeEstimate {
    pub factor: BayesFactor,
    /// Mean acceptance probability of attempts towards the numerator model.
    pub forward_mean: f64,
    pub reverse_mean: f64,
    pub forward_attempts: usize,
    pub reverse_attempts: usize,
}

/// Ratio of mean acceptance probabilities of direct attempts
/// `denominator → numerator` and `numerator → denominator`.
///
/// With `correction`, the ratio is multiplied by
/// `p(k) q(k→k′) / (p(k′) q(k′→k))`, which turns it into a Bayes factor when
/// the model prior or jump probabilities are not symmetric.
pub fn bayes_factor_bridge(
    attempts: &[AttemptRecord],
    numerator: usize,
    denominator: usize,
    include_burn_in: bool,
    correction: Option<&ModelSpace>,
) -> Result<BridgeEstimate> {
    let alphas = |from: usize, to: usize| -> Vec<f64> {
        attempts
            .iter()
            .filter(|a| a.from == from && a.to == to && (include_burn_in || !a.burn_in))
            .map(|a| a.alpha)
            .collect()
    };
    let fwd = alphas(denominator, numerator);
    let rev = alphas(numerator, denominator);
    if fwd.is_empty() || rev.is_empty() {
        return Err(RjError::UndefinedEstimate(format!(
            "no direct attempts between models {denominator} and {numerator} in {}",
            if fwd.is_empty() { "the forward direction" } else { "the reverse direction" }
        )));
    }
    let (mf, mr) = (mean(&fwd), mean(&rev));
    if mr == 0.0 {
        return Err(RjError::UndefinedEstimate("every reverse attempt has zero acceptance probability".into()));
    }
    let mut value = mf / mr;
    if let Some(space) = correction {
        value *= space.model_prior(denominator) * space.jump_prob(denominator, numerator)
            / (space.model_prior(numerator) * space.jump_prob(numerator, denominator));
    }
    let rel = |v: &[f64], m: f64| {
        let se = batch_means_se(v, DEFAULT_BATCHES);
        if se.is_finite() && m > 0.0 {
            (se / m).powi(2)
        } else {
            0.0
        }
    };
    Ok(BridgeEstimate {
        factor: BayesFactor {
            numerator,
            denominator,
            value,
            std_error: value * (rel(&fwd, mf) + rel(&rev, mr)).sqrt(),
        },
        forward_mean: mf,
        reverse_mean: mr,
        forward_attempts: fwd.len(),
        reverse_attempts: rev.len(),
    })
}
