//! The pluggable model interface and the chain state it evaluates.

use crate::error::{Result, RjError};
use crate::kernel;
use crate::rng::ChainRng;
use crate::space::ModelSpace;

/// One state `(k, θ_k)` of a trans-dimensional chain.
///
/// `latent` holds auxiliary discrete variables some models carry alongside
/// `θ_k` (mixture allocations); it is empty for the others. The cached
/// densities always equal a fresh evaluation of the model at `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub model: usize,
    pub params: Vec<f64>,
    pub latent: Vec<u32>,
    pub log_likelihood: f64,
    /// `log p(θ_k | k)`; the model prior `p(k)` lives in the [`ModelSpace`].
    pub log_prior: f64,
}

impl ChainState {
    /// Evaluates `model` at `(k, params, latent)`, checking the dimension.
    pub fn evaluate<M: Model + ?Sized>(
        model: &M,
        k: usize,
        params: Vec<f64>,
        latent: Vec<u32>,
    ) -> Result<Self> {
        let expected = model.dimension(k);
        if params.len() != expected {
            return Err(RjError::dims(format!("parameters of model {k}"), expected, params.len()));
        }
        let log_prior = model.log_prior(k, &params, &latent);
        // skip the likelihood when the prior already excludes the point
        let log_likelihood = if log_prior == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            model.log_likelihood(k, &params, &latent)
        };
        Ok(ChainState {
            model: k,
            params,
            latent,
            log_likelihood: sanitize(log_likelihood),
            log_prior: sanitize(log_prior),
        })
    }

    /// Unnormalised log joint posterior `log p(k) + log p(θ|k) + log L`.
    pub fn log_target(&self, space: &ModelSpace) -> f64 {
        space.log_model_prior(self.model) + self.log_prior + self.log_likelihood
    }

    /// Log of the within-model density `p(θ|k) L(x|k,θ)`.
    pub fn log_density(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }

    pub fn is_finite(&self) -> bool {
        self.log_likelihood.is_finite() && self.log_prior.is_finite()
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// A family of candidate models `ℳ_k` sharing one dataset.
///
/// Log densities return `−∞` outside the support. Every method must be a pure
/// function of its arguments and the model's immutable data.
pub trait Model: Send + Sync {
    /// Length `n_k` of the parameter vector of model `k`.
    fn dimension(&self, k: usize) -> usize;

    fn log_likelihood(&self, k: usize, params: &[f64], latent: &[u32]) -> f64;

    /// `log p(θ_k | k)`, including any latent-variable prior.
    fn log_prior(&self, k: usize, params: &[f64], latent: &[u32]) -> f64;

    /// Draws `(θ_k, latent)` from the prior of model `k`.
    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>);

    /// Within-model update. Defaults to the Gaussian random-walk Metropolis
    /// step with per-coordinate `scales`.
    fn within_model_step(
        &self,
        state: ChainState,
        scales: &[f64],
        rng: &mut ChainRng,
    ) -> Result<ChainState> {
        kernel::mh_within_model_step(self, state, scales, rng)
    }

    /// One update leaving `(p(θ|k) L)^temper` invariant. It must be reversible
    /// with respect to that density: annealed jumps rely on it.
    fn tempered_step(
        &self,
        state: ChainState,
        temper: f64,
        scales: &[f64],
        rng: &mut ChainRng,
    ) -> Result<ChainState> {
        kernel::tempered_mh_step(self, state, temper, scales, rng)
    }

    /// Functional monitored by the convergence diagnostics.
    fn deviance(&self, state: &ChainState) -> f64 {
        -2.0 * state.log_likelihood
    }

    /// `(name, index)` label of each parameter of model `k`, for trace output.
    fn param_labels(&self, k: usize) -> Vec<(&'static str, usize)> {
        (0..self.dimension(k)).map(|i| ("theta", i)).collect()
    }
}
