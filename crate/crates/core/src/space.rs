//! The model space: candidate model indices, the prior over them and the
//! jump graph of between-model proposal probabilities.

use rand::Rng;

use crate::error::{Result, RjError};
use crate::rng::ChainRng;

const PROB_TOL: f64 = 1e-12;

/// Between-model proposal probabilities `q(k → k′)` over a contiguous range
/// of model indices. Each row may keep some self-jump mass.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpGraph {
    first: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl JumpGraph {
    /// Nearest-neighbour moves `k ↔ k±1` with probability 1/2 each. At either
    /// end of the range the outward mass is folded into the inward move; a
    /// range holding a single model gets a pure self-jump.
    pub fn nearest_neighbour(first: usize, last: usize) -> Self {
        let rows = (first..=last)
            .map(|k| {
                if first == last {
                    vec![(k, 1.0)]
                } else if k == first {
                    vec![(k + 1, 1.0)]
                } else if k == last {
                    vec![(k - 1, 1.0)]
                } else {
                    vec![(k - 1, 0.5), (k + 1, 0.5)]
                }
            })
            .collect();
        JumpGraph { first, rows }
    }

    /// Builds a graph from explicit rows, one per model starting at `first`.
    pub fn from_rows(first: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let last = first + rows.len().saturating_sub(1);
        for (i, row) in rows.iter().enumerate() {
            let k = first + i;
            let total: f64 = row.iter().map(|(_, q)| q).sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(RjError::InvalidConfig(format!(
                    "jump probabilities out of model {k} sum to {total}"
                )));
            }
            for &(to, q) in row {
                if to < first || to > last {
                    return Err(RjError::UnknownModel(to));
                }
                if q < 0.0 {
                    return Err(RjError::InvalidConfig(format!(
                        "negative jump probability {k} -> {to}"
                    )));
                }
            }
        }
        let graph = JumpGraph { first, rows };
        for k in first..=last {
            for &(to, q) in graph.targets(k) {
                if q > 0.0 && graph.prob(to, k) <= 0.0 {
                    return Err(RjError::InvalidConfig(format!(
                        "jump graph is not reversible: {k} -> {to} has mass but {to} -> {k} does not"
                    )));
                }
            }
        }
        Ok(graph)
    }

    pub fn targets(&self, from: usize) -> &[(usize, f64)] {
        from.checked_sub(self.first)
            .and_then(|i| self.rows.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `q(from → to)`, zero for undeclared jumps.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.targets(from)
            .iter()
            .filter(|(k, _)| *k == to)
            .map(|(_, q)| q)
            .sum()
    }

    pub fn sample(&self, from: usize, rng: &mut ChainRng) -> Result<usize> {
        let row = self.targets(from);
        if row.is_empty() {
            return Err(RjError::UnknownModel(from));
        }
        let mut u: f64 = rng.random();
        for &(to, q) in row {
            if u < q {
                return Ok(to);
            }
            u -= q;
        }
        Ok(row[row.len() - 1].0)
    }
}

/// Candidate models `first..=last`, their prior probabilities `p(k)` and the
/// jump graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    first: usize,
    prior: Vec<f64>,
    log_prior: Vec<f64>,
    graph: JumpGraph,
}

impl ModelSpace {
    pub fn new(first: usize, prior: Vec<f64>, graph: JumpGraph) -> Result<Self> {
        if prior.is_empty() {
            return Err(RjError::InvalidConfig("empty model space".into()));
        }
        if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(RjError::InvalidConfig("model prior has invalid entries".into()));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(RjError::InvalidConfig(format!(
                "model prior sums to {total}, expected 1"
            )));
        }
        if graph.first != first || graph.rows.len() != prior.len() {
            return Err(RjError::InvalidConfig(
                "jump graph does not cover the model space".into(),
            ));
        }
        let log_prior = prior.iter().map(|p| p.ln()).collect();
        Ok(ModelSpace {
            first,
            prior,
            log_prior,
            graph,
        })
    }

    /// Uniform prior on `first..=last` with the nearest-neighbour graph.
    pub fn uniform(first: usize, last: usize) -> Self {
        let n = last - first + 1;
        Self::from_weights(first, vec![1.0; n])
    }

    /// Poisson(`rate`) prior truncated to `first..=last`, nearest-neighbour graph.
    pub fn truncated_poisson(first: usize, last: usize, rate: f64) -> Self {
        let weights = (first..=last)
            .map(|k| (k as f64 * rate.ln() - crate::stats::ln_factorial(k)).exp())
            .collect();
        Self::from_weights(first, weights)
    }

    /// Normalises nonnegative `weights` into a prior; nearest-neighbour graph.
    pub fn from_weights(first: usize, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        let last = first + weights.len() - 1;
        let prior = weights.into_iter().map(|w| w / total).collect();
        ModelSpace::new(first, prior, JumpGraph::nearest_neighbour(first, last))
            .expect("normalised weights form a valid model space")
    }

    pub fn with_graph(mut self, graph: JumpGraph) -> Result<Self> {
        if graph.first != self.first || graph.rows.len() != self.prior.len() {
            return Err(RjError::InvalidConfig(
                "jump graph does not cover the model space".into(),
            ));
        }
        self.graph = graph;
        Ok(self)
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn last(&self) -> usize {
        self.first + self.prior.len() - 1
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last()
    }

    pub fn contains(&self, k: usize) -> bool {
        k >= self.first && k <= self.last()
    }

    pub fn model_prior(&self, k: usize) -> f64 {
        if self.contains(k) {
            self.prior[k - self.first]
        } else {
            0.0
        }
    }

    pub fn log_model_prior(&self, k: usize) -> f64 {
        if self.contains(k) {
            self.log_prior[k - self.first]
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn graph(&self) -> &JumpGraph {
        &self.graph
    }

    pub fn jump_prob(&self, from: usize, to: usize) -> f64 {
        self.graph.prob(from, to)
    }
}
