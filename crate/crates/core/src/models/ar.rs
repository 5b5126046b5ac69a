//! Autoregressive models of unknown order.
//!
//! `AR(k)`: `x_t = Σ_{τ≤k} a_τ x_{t−τ} + ε_t`, `ε_t ~ N(0, σ²)`, with
//! parameters `[σ², a₁…a_k]`, `a_τ ~ N(0, σ_a²)` and `σ² ~ IG(shape, scale)`.
//! Every order conditions on the same first `k_max` observations so that
//! likelihoods of different orders are comparable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RjError};
use crate::model::{ChainState, Model};
use crate::moves::jump::{AppendScaledMap, JumpMove, NoAux, StdNormalAux};
use crate::rng::ChainRng;
use crate::space::ModelSpace;
use crate::stats::{inv_gamma_log_pdf, normal_log_pdf, population_variance, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArHyper {
    pub k_max: usize,
    /// Prior standard deviation of each coefficient.
    pub sigma_a: f64,
    pub noise_shape: f64,
    /// `None` uses the sample variance of the series.
    pub noise_scale: Option<f64>,
}

impl Default for ArHyper {
    fn default() -> Self {
        ArHyper {
            k_max: 5,
            sigma_a: 1.0,
            noise_shape: 2.0,
            noise_scale: None,
        }
    }
}

/// Conditional log-likelihood of `x_{c+1..T}` given `x_{1..c}` for
/// `params = [σ², a₁…a_k]`, `k ≤ c`.
pub fn ar_log_likelihood(params: &[f64], series: &[f64], condition_on: usize) -> Result<f64> {
    let k = params.len().saturating_sub(1);
    if params.is_empty() || condition_on < k {
        return Err(RjError::Evaluation(format!("cannot condition an AR({k}) likelihood on {condition_on} values")));
    }
    if series.len() <= condition_on {
        return Err(RjError::Evaluation(format!(
            "series of length {} is too short for order {k}",
            series.len()
        )));
    }
    let var = params[0];
    if !(var > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let a = &params[1..];
    let mut ss = 0.0;
    for t in condition_on..series.len() {
        let fit: f64 = a.iter().enumerate().map(|(i, ai)| ai * series[t - 1 - i]).sum();
        let e = series[t] - fit;
        ss += e * e;
    }
    let n = (series.len() - condition_on) as f64;
    Ok(-0.5 * n * (LN_2PI + var.ln()) - 0.5 * ss / var)
}

/// Log prior of `[σ², a₁…a_k]`.
pub fn ar_log_prior(params: &[f64], sigma_a: f64, noise_shape: f64, noise_scale: f64) -> f64 {
    inv_gamma_log_pdf(params[0], noise_shape, noise_scale)
        + params[1..].iter().map(|a| normal_log_pdf(*a, 0.0, sigma_a * sigma_a)).sum::<f64>()
}

/// Full log posterior of `AR(k)` (up to a constant) with a uniform prior on
/// `k ∈ 1..=k_max`, conditioning on the first `k` observations.
pub fn ar_log_posterior(params: &[f64], series: &[f64], hyper: &ArHyper) -> Result<f64> {
    let k = params.len().saturating_sub(1);
    if k == 0 || k > hyper.k_max {
        return Ok(f64::NEG_INFINITY);
    }
    let scale = hyper.noise_scale.unwrap_or_else(|| population_variance(series));
    let ll = ar_log_likelihood(params, series, k)?;
    Ok(ll + ar_log_prior(params, hyper.sigma_a, hyper.noise_shape, scale) - (hyper.k_max as f64).ln())
}

#[derive(Debug, Clone)]
pub struct ArModel {
    series: Vec<f64>,
    hyper: ArHyper,
    noise_scale: f64,
    gram: DMatrix<f64>,
    cross: DVector<f64>,
}

impl ArModel {
    pub fn new(series: Vec<f64>, hyper: ArHyper) -> Result<Self> {
        if hyper.k_max == 0 {
            return Err(RjError::InvalidConfig("k_max must be at least 1".into()));
        }
        if !(hyper.sigma_a > 0.0) || !(hyper.noise_shape > 0.0) || hyper.noise_scale.is_some_and(|s| !(s > 0.0)) {
            return Err(RjError::InvalidConfig("AR prior parameters must be positive".into()));
        }
        if series.len() <= hyper.k_max + 1 {
            return Err(RjError::InsufficientData(format!(
                "series of length {} is too short for k_max = {}",
                series.len(),
                hyper.k_max
            )));
        }
        if series.iter().any(|x| !x.is_finite()) {
            return Err(RjError::InvalidConfig("AR series must be finite".into()));
        }
        let noise_scale = hyper.noise_scale.unwrap_or_else(|| population_variance(&series));
        if !(noise_scale > 0.0) {
            return Err(RjError::InvalidConfig("constant series: noise scale must be given".into()));
        }
        let c = hyper.k_max;
        let mut gram = DMatrix::zeros(c, c);
        let mut cross = DVector::zeros(c);
        for t in c..series.len() {
            for i in 0..c {
                cross[i] += series[t] * series[t - 1 - i];
                for j in 0..c {
                    gram[(i, j)] += series[t - 1 - i] * series[t - 1 - j];
                }
            }
        }
        Ok(ArModel {
            series,
            hyper,
            noise_scale,
            gram,
            cross,
        })
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    pub fn hyper(&self) -> &ArHyper {
        &self.hyper
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Uniform prior on `1..=k_max`, nearest-neighbour jumps.
    pub fn space(&self) -> ModelSpace {
        ModelSpace::uniform(1, self.hyper.k_max)
    }

    fn residual_ss(&self, a: &[f64]) -> f64 {
        let c = self.hyper.k_max;
        let mut ss = 0.0;
        for t in c..self.series.len() {
            let fit: f64 = a.iter().enumerate().map(|(i, ai)| ai * self.series[t - 1 - i]).sum();
            let e = self.series[t] - fit;
            ss += e * e;
        }
        ss
    }

    fn observations(&self) -> usize {
        self.series.len() - self.hyper.k_max
    }
}

impl Model for ArModel {
    fn dimension(&self, k: usize) -> usize {
        k + 1
    }

    fn log_likelihood(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        if k == 0 || k > self.hyper.k_max {
            return f64::NEG_INFINITY;
        }
        ar_log_likelihood(params, &self.series, self.hyper.k_max).unwrap_or(f64::NEG_INFINITY)
    }

    fn log_prior(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        if k == 0 || k > self.hyper.k_max {
            return f64::NEG_INFINITY;
        }
        ar_log_prior(params, self.hyper.sigma_a, self.hyper.noise_shape, self.noise_scale)
    }

    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
        let g = Gamma::new(self.hyper.noise_shape, 1.0 / self.noise_scale).expect("valid gamma");
        let mut params = vec![1.0 / g.sample(rng)];
        params.extend((0..k).map(|_| self.hyper.sigma_a * rng.sample::<f64, _>(StandardNormal)));
        (params, Vec::new())
    }

    /// Gibbs update: `a | σ²` multivariate normal, then `σ² | a` inverse gamma.
    fn within_model_step(&self, state: ChainState, _scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        let k = state.model;
        let var = state.params[0];
        let prior_prec = 1.0 / (self.hyper.sigma_a * self.hyper.sigma_a);
        let mut prec = self.gram.view((0, 0), (k, k)) / var;
        for i in 0..k {
            prec[(i, i)] += prior_prec;
        }
        let rhs = self.cross.rows(0, k) / var;
        let chol = nalgebra::Cholesky::new(prec).ok_or_else(|| RjError::Singular("AR posterior precision".into()))?;
        let mean = chol.solve(&rhs);
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let dev = chol.l().transpose().solve_upper_triangular(&z).ok_or_else(|| RjError::Singular("AR Cholesky factor".into()))?;
        let a: Vec<f64> = (mean + dev).iter().copied().collect();
        let shape = self.hyper.noise_shape + 0.5 * self.observations() as f64;
        let rate = self.noise_scale + 0.5 * self.residual_ss(&a);
        let g = Gamma::new(shape, 1.0 / rate).map_err(|e| RjError::Evaluation(e.to_string()))?;
        let mut params = vec![1.0 / g.sample(rng)];
        params.extend(a);
        ChainState::evaluate(self, k, params, Vec::new())
    }

    fn param_labels(&self, k: usize) -> Vec<(&'static str, usize)> {
        let mut labels = vec![("noise_variance", 0)];
        labels.extend((1..=k).map(|i| ("coefficient", i)));
        labels
    }
}

/// Birth `a_{k+1} = σu`, `u ~ N(0, 1)`, between orders `k` and `k + 1`, with
/// its deterministic death.
pub fn ar_birth_move(model: &ArModel, k: usize, sigma: f64) -> Result<JumpMove> {
    JumpMove::new(model, AppendScaledMap { source: k, target: k + 1, scale: sigma }, StdNormalAux(1), NoAux)
}

/// Simulates `T` values of a zero-mean AR process after discarding `burn`
/// initial values.
pub fn simulate_ar(coefficients: &[f64], noise_sd: f64, length: usize, burn: usize, rng: &mut ChainRng) -> Vec<f64> {
    let p = coefficients.len();
    let mut x = vec![0.0; p];
    for _ in 0..burn + length {
        let t = x.len();
        let fit: f64 = coefficients.iter().enumerate().map(|(i, a)| a * x[t - 1 - i]).sum();
        x.push(fit + noise_sd * rng.sample::<f64, _>(StandardNormal));
    }
    x.split_off(p + burn)
}
