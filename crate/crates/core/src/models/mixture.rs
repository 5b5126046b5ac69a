//! Finite univariate Gaussian mixtures with an unknown number of components.
//!
//! Parameters of a `k`-component state are laid out as
//! `[w₁…w_k, μ₁…μ_k, σ²₁…σ²_k]`; the latent vector holds one zero-based
//! allocation label per observation (empty when there are no data).
//! Components are kept sorted by mean, so the prior carries a `k!` factor.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RjError};
use crate::model::{ChainState, Model};
use crate::rng::ChainRng;
use crate::space::ModelSpace;
use crate::stats::{inv_gamma_log_pdf, ln_factorial, ln_gamma, log_sum_exp, normal_log_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureHyper {
    /// Symmetric Dirichlet parameter of the weights.
    pub delta: f64,
    /// Prior mean of the component means.
    pub xi: f64,
    /// Prior precision of the component means.
    pub kappa: f64,
    /// Inverse-gamma shape of the variances.
    pub alpha: f64,
    /// Inverse-gamma scale of the variances.
    pub beta: f64,
    pub k_max: usize,
}

impl Default for MixtureHyper {
    fn default() -> Self {
        MixtureHyper {
            delta: 1.0,
            xi: 0.0,
            kappa: 1.0,
            alpha: 2.0,
            beta: 0.02,
            k_max: 30,
        }
    }
}

impl MixtureHyper {
    /// Defaults scaled to the data: `ξ` the midrange, `κ = 1/R²`,
    /// `β = 0.02 R²` where `R` is the range.
    pub fn from_data(data: &[f64]) -> Self {
        let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut h = MixtureHyper::default();
        if lo.is_finite() && hi > lo {
            let r = hi - lo;
            h.xi = 0.5 * (lo + hi);
            h.kappa = 1.0 / (r * r);
            h.beta = 0.02 * r * r;
        } else if lo.is_finite() {
            h.xi = lo;
        }
        h
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("delta", self.delta),
            ("kappa", self.kappa),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(RjError::InvalidConfig(format!("mixture hyperparameter {name} must be positive")));
            }
        }
        if !self.xi.is_finite() {
            return Err(RjError::InvalidConfig("mixture hyperparameter xi must be finite".into()));
        }
        if self.k_max == 0 {
            return Err(RjError::InvalidConfig("k_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

impl Component {
    pub fn new(weight: f64, mean: f64, var: f64) -> Self {
        Component { weight, mean, var }
    }

    fn log_density(&self, x: f64) -> f64 {
        normal_log_pdf(x, self.mean, self.var)
    }
}

/// Number of components encoded in a parameter vector.
pub fn component_count(params: &[f64]) -> usize {
    params.len() / 3
}

pub fn unpack(params: &[f64]) -> Vec<Component> {
    let k = component_count(params);
    (0..k)
        .map(|j| Component::new(params[j], params[k + j], params[2 * k + j]))
        .collect()
}

pub fn pack(components: &[Component]) -> Vec<f64> {
    let mut out: Vec<f64> = components.iter().map(|c| c.weight).collect();
    out.extend(components.iter().map(|c| c.mean));
    out.extend(components.iter().map(|c| c.var));
    out
}

fn order_key(a: &Component, b: &Component) -> std::cmp::Ordering {
    a.mean
        .total_cmp(&b.mean)
        .then(a.weight.total_cmp(&b.weight))
        .then(a.var.total_cmp(&b.var))
}

/// Sorts components ascending by mean (ties by weight, then variance) and
/// relabels the allocations to follow.
pub fn sort_components(components: &[Component], allocations: &[u32]) -> (Vec<Component>, Vec<u32>) {
    let mut order: Vec<usize> = (0..components.len()).collect();
    order.sort_by(|&a, &b| order_key(&components[a], &components[b]));
    let mut new_label = vec![0u32; components.len()];
    for (new, &old) in order.iter().enumerate() {
        new_label[old] = new as u32;
    }
    let sorted = order.iter().map(|&j| components[j]).collect();
    let z = allocations.iter().map(|&l| new_label[l as usize]).collect();
    (sorted, z)
}

fn valid_components(components: &[Component]) -> bool {
    if components.is_empty() {
        return false;
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    (total - 1.0).abs() <= 1e-9
        && components
            .iter()
            .all(|c| c.weight > 0.0 && c.var > 0.0 && c.mean.is_finite() && c.var.is_finite())
}

/// `Σᵢ log Σⱼ wⱼ φ(xᵢ | μⱼ, σ²ⱼ)`.
pub fn marginal_log_likelihood(params: &[f64], data: &[f64]) -> f64 {
    let comps = unpack(params);
    if !valid_components(&comps) {
        return f64::NEG_INFINITY;
    }
    let mut terms = vec![0.0; comps.len()];
    data.iter()
        .map(|&x| {
            for (t, c) in terms.iter_mut().zip(&comps) {
                *t = c.weight.ln() + c.log_density(x);
            }
            log_sum_exp(&terms)
        })
        .sum()
}

/// `Σᵢ log φ(xᵢ | μ_{zᵢ}, σ²_{zᵢ})`.
pub fn allocated_log_likelihood(params: &[f64], allocations: &[u32], data: &[f64]) -> f64 {
    let comps = unpack(params);
    if !valid_components(&comps) || allocations.len() != data.len() {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for (&x, &z) in data.iter().zip(allocations) {
        match comps.get(z as usize) {
            Some(c) => total += c.log_density(x),
            None => return f64::NEG_INFINITY,
        }
    }
    total
}

/// Log prior of the component parameters, plus `Σᵢ log w_{zᵢ}` when
/// allocations are given.
pub fn mixture_log_prior(params: &[f64], allocations: Option<&[u32]>, hyper: &MixtureHyper) -> f64 {
    let comps = unpack(params);
    if params.len() % 3 != 0 || !valid_components(&comps) || comps.len() > hyper.k_max {
        return f64::NEG_INFINITY;
    }
    let k = comps.len() as f64;
    let mut lp = ln_gamma(k * hyper.delta) - k * ln_gamma(hyper.delta) + ln_factorial(comps.len());
    for c in &comps {
        lp += (hyper.delta - 1.0) * c.weight.ln()
            + normal_log_pdf(c.mean, hyper.xi, 1.0 / hyper.kappa)
            + inv_gamma_log_pdf(c.var, hyper.alpha, hyper.beta);
    }
    if let Some(z) = allocations {
        for &l in z {
            match comps.get(l as usize) {
                Some(c) => lp += c.weight.ln(),
                None => return f64::NEG_INFINITY,
            }
        }
    }
    lp
}

/// Log posterior (up to the normalising constant, excluding `p(k)`) in the
/// marginal form when `allocations` is `None` and the allocation form
/// otherwise. Empty data gives the prior alone.
pub fn mixture_log_posterior(params: &[f64], data: &[f64], allocations: Option<&[u32]>, hyper: &MixtureHyper) -> f64 {
    let lp = mixture_log_prior(params, allocations, hyper);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    let ll = match allocations {
        Some(z) => allocated_log_likelihood(params, z, data),
        None => marginal_log_likelihood(params, data),
    };
    lp + ll
}

/// Posterior allocation probabilities of a datum `x`.
pub fn allocation_probs(components: &[Component], x: f64) -> Vec<f64> {
    let logs: Vec<f64> = components.iter().map(|c| c.weight.ln() + c.log_density(x)).collect();
    let z = log_sum_exp(&logs);
    logs.iter().map(|l| (l - z).exp()).collect()
}

fn draw_category(probs: &[f64], rng: &mut ChainRng) -> usize {
    let mut u = rng.random::<f64>();
    for (j, p) in probs.iter().enumerate() {
        if u < *p {
            return j;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Resamples every allocation from its exact conditional.
pub fn gibbs_allocations(params: &[f64], data: &[f64], rng: &mut ChainRng) -> Vec<u32> {
    let comps = unpack(params);
    data.iter()
        .map(|&x| draw_category(&allocation_probs(&comps, x), rng) as u32)
        .collect()
}

fn draw_gamma(shape: f64, rate: f64, rng: &mut ChainRng) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters").sample(rng)
}

fn draw_dirichlet(alpha: &[f64], rng: &mut ChainRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = alpha.iter().map(|&a| draw_gamma(a, 1.0, rng)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 && g.iter().all(|x| *x > 0.0) {
            return g.iter().map(|x| x / total).collect();
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixtureModel {
    data: Vec<f64>,
    hyper: MixtureHyper,
}

impl MixtureModel {
    pub fn new(data: Vec<f64>, hyper: MixtureHyper) -> Result<Self> {
        hyper.validate()?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(RjError::InvalidConfig("mixture data must be finite".into()));
        }
        Ok(MixtureModel { data, hyper })
    }

    /// Model with data-driven default hyperparameters.
    pub fn with_defaults(data: Vec<f64>) -> Result<Self> {
        let hyper = MixtureHyper::from_data(&data);
        MixtureModel::new(data, hyper)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn hyper(&self) -> &MixtureHyper {
        &self.hyper
    }

    /// Uniform model prior on `1..=k_max` with nearest-neighbour jumps.
    pub fn space(&self) -> ModelSpace {
        ModelSpace::uniform(1, self.hyper.k_max)
    }

    pub fn prior_only(&self) -> bool {
        self.data.is_empty()
    }

    fn latent<'a>(&self, latent: &'a [u32]) -> Option<&'a [u32]> {
        (!self.prior_only()).then_some(latent)
    }

    pub(crate) fn draw_component(&self, weight: f64, rng: &mut ChainRng) -> Component {
        let mean = self.hyper.xi + rng.sample::<f64, _>(StandardNormal) / self.hyper.kappa.sqrt();
        let var = 1.0 / draw_gamma(self.hyper.alpha, self.hyper.beta, rng);
        Component::new(weight, mean, var)
    }

    /// Log density under the prior draw of a new component's mean and variance.
    pub(crate) fn component_prior_log_density(&self, c: &Component) -> f64 {
        normal_log_pdf(c.mean, self.hyper.xi, 1.0 / self.hyper.kappa) + inv_gamma_log_pdf(c.var, self.hyper.alpha, self.hyper.beta)
    }

    /// Builds the state for sorted components and allocations.
    pub fn state(&self, components: &[Component], allocations: Vec<u32>) -> Result<ChainState> {
        let (sorted, z) = sort_components(components, &allocations);
        let z = if self.prior_only() { Vec::new() } else { z };
        ChainState::evaluate(self, sorted.len(), pack(&sorted), z)
    }
}

impl Model for MixtureModel {
    fn dimension(&self, k: usize) -> usize {
        3 * k
    }

    fn log_likelihood(&self, _k: usize, params: &[f64], latent: &[u32]) -> f64 {
        if self.prior_only() {
            return if valid_components(&unpack(params)) { 0.0 } else { f64::NEG_INFINITY };
        }
        allocated_log_likelihood(params, latent, &self.data)
    }

    fn log_prior(&self, k: usize, params: &[f64], latent: &[u32]) -> f64 {
        if k == 0 || params.len() != 3 * k || (!self.prior_only() && latent.len() != self.data.len()) {
            return f64::NEG_INFINITY;
        }
        mixture_log_prior(params, self.latent(latent), &self.hyper)
    }

    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
        let w = draw_dirichlet(&vec![self.hyper.delta; k], rng);
        let comps: Vec<Component> = w.iter().map(|&wj| self.draw_component(wj, rng)).collect();
        let z = if self.prior_only() {
            Vec::new()
        } else {
            gibbs_allocations(&pack(&comps), &self.data, rng)
        };
        let (sorted, z) = sort_components(&comps, &z);
        (pack(&sorted), z)
    }

    /// Gibbs sweep over allocations, weights, means and variances, followed
    /// by sorting the components.
    fn within_model_step(&self, state: ChainState, _scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        let k = state.model;
        let h = &self.hyper;
        let z = if self.prior_only() {
            Vec::new()
        } else {
            gibbs_allocations(&state.params, &self.data, rng)
        };
        let mut counts = vec![0usize; k];
        let mut sums = vec![0.0; k];
        for (&x, &l) in self.data.iter().zip(&z) {
            counts[l as usize] += 1;
            sums[l as usize] += x;
        }
        let alpha: Vec<f64> = counts.iter().map(|&n| h.delta + n as f64).collect();
        let w = draw_dirichlet(&alpha, rng);
        let old = unpack(&state.params);
        let mut comps = Vec::with_capacity(k);
        for j in 0..k {
            let prec = counts[j] as f64 / old[j].var + h.kappa;
            let mean = (sums[j] / old[j].var + h.kappa * h.xi) / prec + rng.sample::<f64, _>(StandardNormal) / prec.sqrt();
            let ss: f64 = self
                .data
                .iter()
                .zip(&z)
                .filter(|(_, &l)| l as usize == j)
                .map(|(&x, _)| (x - mean) * (x - mean))
                .sum();
            let var = 1.0 / draw_gamma(h.alpha + 0.5 * counts[j] as f64, h.beta + 0.5 * ss, rng);
            comps.push(Component::new(w[j], mean, var));
        }
        self.state(&comps, z)
    }

    /// `−2 ×` the marginal (allocation-free) log-likelihood.
    fn deviance(&self, state: &ChainState) -> f64 {
        -2.0 * marginal_log_likelihood(&state.params, &self.data)
    }

    fn param_labels(&self, k: usize) -> Vec<(&'static str, usize)> {
        ["weight", "mean", "variance"]
            .iter()
            .flat_map(|&n| (0..k).map(move |j| (n, j)))
            .collect()
    }
}

/// Draws `n` observations from the mixture `components`; returns the data
/// and the generating labels.
pub fn simulate_mixture(components: &[Component], n: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
    let w: Vec<f64> = components.iter().map(|c| c.weight).collect();
    let total: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    let mut data = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let j = draw_category(&probs, rng);
        let c = components[j];
        data.push(c.mean + c.var.sqrt() * rng.sample::<f64, _>(StandardNormal));
        labels.push(j as u32);
    }
    (data, labels)
}
