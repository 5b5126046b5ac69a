//! Small models with exactly computable posteriors.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RjError};
use crate::model::{ChainState, Model};
use crate::moves::jump::DimensionMap;
use crate::moves::delayed::StageTwoMap;
use crate::rng::ChainRng;
use crate::space::ModelSpace;
use crate::stats::{normal_log_pdf, LN_2PI};

fn draw_index(weights: &[f64], rng: &mut ChainRng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Two models over finite parameter sets: model 1 has `θ ∈ {0, …, m−1}`,
/// model 2 has `(θ₁, θ₂) ∈ {0, …, m−1}²`. The prior is uniform within each
/// model and the likelihood is a positive weight table.
#[derive(Debug, Clone)]
pub struct DiscreteToy {
    m: usize,
    weights1: Vec<f64>,
    /// Row-major `m × m` table indexed by `(θ₁, θ₂)`.
    weights2: Vec<f64>,
}

impl DiscreteToy {
    pub fn new(weights1: Vec<f64>, weights2: Vec<f64>) -> Result<Self> {
        let m = weights1.len();
        if m == 0 || weights2.len() != m * m {
            return Err(RjError::dims("discrete toy weight table", m * m, weights2.len()));
        }
        if weights1.iter().chain(&weights2).any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(RjError::InvalidConfig("discrete toy weights must be positive".into()));
        }
        Ok(DiscreteToy { m, weights1, weights2 })
    }

    /// A fixed irregular target on `m = 4` values per coordinate. `mass_ratio`
    /// scales the total weight of model 2 relative to model 1.
    pub fn standard(mass_ratio: f64) -> Self {
        let w1 = vec![1.0, 3.0, 2.0, 0.5];
        let base2 = [
            0.6, 1.5, 0.4, 2.0, //
            1.0, 0.3, 2.5, 0.8, //
            0.2, 1.7, 1.1, 0.9, //
            1.4, 0.5, 0.7, 3.0,
        ];
        let t1: f64 = w1.iter().sum::<f64>() / 4.0;
        let t2: f64 = base2.iter().sum::<f64>() / 16.0;
        let w2 = base2.iter().map(|w| w * mass_ratio * t1 / t2).collect();
        DiscreteToy::new(w1, w2).expect("valid standard toy")
    }

    pub fn values(&self) -> usize {
        self.m
    }

    fn weight(&self, k: usize, params: &[f64]) -> Option<f64> {
        let idx = |x: f64| -> Option<usize> {
            (x >= 0.0 && x.fract() == 0.0 && (x as usize) < self.m).then_some(x as usize)
        };
        match k {
            1 => Some(self.weights1[idx(params[0])?]),
            2 => Some(self.weights2[idx(params[0])? * self.m + idx(params[1])?]),
            _ => None,
        }
    }

    /// Number of cells of the joint state space, model 1 first.
    pub fn cell_count(&self) -> usize {
        self.m + self.m * self.m
    }

    /// Cell of a state in the enumeration used by [`DiscreteToy::exact_target`].
    pub fn cell(&self, k: usize, params: &[f64]) -> usize {
        match k {
            1 => params[0] as usize,
            _ => self.m + params[0] as usize * self.m + params[1] as usize,
        }
    }

    /// Exact posterior probability of every cell.
    pub fn exact_target(&self, space: &ModelSpace) -> Vec<f64> {
        let m = self.m as f64;
        let mut p: Vec<f64> = self
            .weights1
            .iter()
            .map(|w| space.model_prior(1) * w / m)
            .chain(self.weights2.iter().map(|w| space.model_prior(2) * w / (m * m)))
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    fn tempered_weights(&self, k: usize, params: &[f64], coord: usize, temper: f64) -> Vec<f64> {
        (0..self.m)
            .map(|v| {
                let mut p = params.to_vec();
                p[coord] = v as f64;
                self.weight(k, &p).unwrap().powf(temper)
            })
            .collect()
    }
}

impl Model for DiscreteToy {
    fn dimension(&self, k: usize) -> usize {
        match k {
            1 => 1,
            2 => 2,
            _ => 0,
        }
    }

    fn log_likelihood(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        self.weight(k, params).map_or(f64::NEG_INFINITY, f64::ln)
    }

    fn log_prior(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        match self.weight(k, params) {
            Some(_) => -(params.len() as f64) * (self.m as f64).ln(),
            None => f64::NEG_INFINITY,
        }
    }

    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
        let params = (0..self.dimension(k)).map(|_| rng.random_range(0..self.m) as f64).collect();
        (params, Vec::new())
    }

    /// Exact draw of `θ_k` from its conditional posterior.
    fn within_model_step(&self, state: ChainState, _scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        let params = match state.model {
            1 => vec![draw_index(&self.weights1, rng) as f64],
            2 => {
                let c = draw_index(&self.weights2, rng);
                vec![(c / self.m) as f64, (c % self.m) as f64]
            }
            k => return Err(RjError::UnknownModel(k)),
        };
        ChainState::evaluate(self, state.model, params, Vec::new())
    }

    /// Random-scan single-coordinate Gibbs update of the tempered density.
    fn tempered_step(&self, state: ChainState, temper: f64, _scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        let coord = rng.random_range(0..state.params.len());
        let w = self.tempered_weights(state.model, &state.params, coord, temper);
        let mut params = state.params.clone();
        params[coord] = draw_index(&w, rng) as f64;
        ChainState::evaluate(self, state.model, params, Vec::new())
    }
}

/// `(θ, u) ↦ (θ, (θ + u) mod m)` from model 1 to model 2 of [`DiscreteToy`].
#[derive(Debug, Clone, Copy)]
pub struct DiscreteOffsetMap {
    pub m: usize,
}

impl DiscreteOffsetMap {
    fn wrap(&self, x: f64) -> f64 {
        x.rem_euclid(self.m as f64)
    }
}

impl DimensionMap for DiscreteOffsetMap {
    fn source(&self) -> usize {
        1
    }
    fn target(&self) -> usize {
        2
    }
    fn forward(&self, theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![theta[0], self.wrap(theta[0] + u[0])], Vec::new()))
    }
    fn inverse(&self, theta: &[f64], _u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![theta[0]], vec![self.wrap(theta[1] - theta[0])]))
    }
    fn log_jacobian(&self, _theta: &[f64], _u: &[f64]) -> f64 {
        0.0
    }
}

/// Second-stage map `(θ, u₁, u₂) ↦ (θ, (θ + u₁ + u₂) mod m)`.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteShiftedOffset {
    pub m: usize,
}

impl StageTwoMap for DiscreteShiftedOffset {
    fn forward(&self, theta: &[f64], u1: &[f64], u2: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![theta[0], (theta[0] + u1[0] + u2[0]).rem_euclid(self.m as f64)])
    }
    fn inverse(&self, theta: &[f64], u1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![theta[0]], vec![(theta[1] - theta[0] - u1[0]).rem_euclid(self.m as f64)]))
    }
    fn log_jacobian(&self, _theta: &[f64], _u1: &[f64], _u2: &[f64]) -> f64 {
        0.0
    }
}

/// Models with independent Gaussian "posteriors": model `k` has
/// `θ ~ N(mean_k, diag(sd_k²))` and posterior mass proportional to
/// `p(k)·exp(log_mass_k)`. The prior carries the Gaussian and the likelihood
/// is the constant `log_mass_k`.
#[derive(Debug, Clone)]
pub struct GaussianToy {
    first: usize,
    means: Vec<Vec<f64>>,
    sds: Vec<Vec<f64>>,
    log_mass: Vec<f64>,
}

impl GaussianToy {
    pub fn new(first: usize, means: Vec<Vec<f64>>, sds: Vec<Vec<f64>>, log_mass: Vec<f64>) -> Result<Self> {
        if means.len() != sds.len() || means.len() != log_mass.len() || means.is_empty() {
            return Err(RjError::InvalidConfig("gaussian toy: one mean, sd and mass per model".into()));
        }
        for (m, s) in means.iter().zip(&sds) {
            if m.len() != s.len() {
                return Err(RjError::dims("gaussian toy sd vector", m.len(), s.len()));
            }
            if s.iter().any(|x| !(*x > 0.0)) {
                return Err(RjError::InvalidConfig("gaussian toy sds must be positive".into()));
            }
        }
        Ok(GaussianToy { first, means, sds, log_mass })
    }

    fn slot(&self, k: usize) -> Option<usize> {
        k.checked_sub(self.first).filter(|i| *i < self.means.len())
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[self.slot(k).expect("model in range")]
    }

    pub fn sd(&self, k: usize) -> &[f64] {
        &self.sds[self.slot(k).expect("model in range")]
    }

    /// Exact posterior model probabilities under `space`.
    pub fn exact_model_probs(&self, space: &ModelSpace) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.means.len())
            .map(|i| space.log_model_prior(self.first + i) + self.log_mass[i])
            .collect();
        let z = crate::stats::log_sum_exp(&logs);
        logs.iter().map(|l| (l - z).exp()).collect()
    }
}

impl Model for GaussianToy {
    fn dimension(&self, k: usize) -> usize {
        self.slot(k).map_or(0, |i| self.means[i].len())
    }

    fn log_likelihood(&self, k: usize, _params: &[f64], _latent: &[u32]) -> f64 {
        self.slot(k).map_or(f64::NEG_INFINITY, |i| self.log_mass[i])
    }

    fn log_prior(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        let Some(i) = self.slot(k) else {
            return f64::NEG_INFINITY;
        };
        params
            .iter()
            .zip(&self.means[i])
            .zip(&self.sds[i])
            .map(|((x, m), s)| normal_log_pdf(*x, *m, s * s))
            .sum()
    }

    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
        let i = self.slot(k).expect("model in range");
        let params = self.means[i]
            .iter()
            .zip(&self.sds[i])
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        (params, Vec::new())
    }

    /// Exact draw from the within-model posterior.
    fn within_model_step(&self, state: ChainState, _scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        let (params, latent) = self.sample_prior(state.model, rng);
        ChainState::evaluate(self, state.model, params, latent)
    }
}

/// Conjugate Gaussian-mean comparison on data `x₁…x_n` with unit noise
/// variance: model 1 fixes the mean at 0 and has no parameters, model 2 has
/// `μ ~ N(0, τ²)`.
#[derive(Debug, Clone)]
pub struct ConjugateMeanToy {
    data: Vec<f64>,
    tau: f64,
    sum: f64,
    sum_sq: f64,
}

impl ConjugateMeanToy {
    pub fn new(data: Vec<f64>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(RjError::InvalidConfig("prior sd must be positive".into()));
        }
        let sum = data.iter().sum();
        let sum_sq = data.iter().map(|x| x * x).sum();
        Ok(ConjugateMeanToy { data, tau, sum, sum_sq })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mean and sd of `μ | x` in model 2.
    pub fn posterior_mean_sd(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        let prec = n + 1.0 / (self.tau * self.tau);
        (self.sum / prec, prec.recip().sqrt())
    }

    /// `log m₂(x) − log m₁(x)`.
    pub fn analytic_log_bayes_factor(&self) -> f64 {
        let n = self.data.len() as f64;
        let t2 = self.tau * self.tau;
        -0.5 * (1.0 + n * t2).ln() + t2 * self.sum * self.sum / (2.0 * (1.0 + n * t2))
    }

    fn log_lik_at(&self, mu: f64) -> f64 {
        let n = self.data.len() as f64;
        -0.5 * n * LN_2PI - 0.5 * (self.sum_sq - 2.0 * mu * self.sum + n * mu * mu)
    }
}

impl Model for ConjugateMeanToy {
    fn dimension(&self, k: usize) -> usize {
        usize::from(k == 2)
    }

    fn log_likelihood(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        match k {
            1 => self.log_lik_at(0.0),
            2 => self.log_lik_at(params[0]),
            _ => f64::NEG_INFINITY,
        }
    }

    fn log_prior(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        match k {
            1 => 0.0,
            2 => normal_log_pdf(params[0], 0.0, self.tau * self.tau),
            _ => f64::NEG_INFINITY,
        }
    }

    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
        let params = if k == 2 {
            vec![self.tau * rng.sample::<f64, _>(StandardNormal)]
        } else {
            Vec::new()
        };
        (params, Vec::new())
    }

    /// Exact conjugate draw of `μ` in model 2.
    fn within_model_step(&self, state: ChainState, _scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        if state.model != 2 {
            return Ok(state);
        }
        let (m, s) = self.posterior_mean_sd();
        let mu = m + s * rng.sample::<f64, _>(StandardNormal);
        ChainState::evaluate(self, 2, vec![mu], Vec::new())
    }
}

/// `(∅, u) ↦ μ = u` from model 1 to model 2 of [`ConjugateMeanToy`].
#[derive(Debug, Clone, Copy)]
pub struct IndependenceMap;

impl DimensionMap for IndependenceMap {
    fn source(&self) -> usize {
        1
    }
    fn target(&self) -> usize {
        2
    }
    fn forward(&self, _theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((u.to_vec(), Vec::new()))
    }
    fn inverse(&self, theta: &[f64], _u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((Vec::new(), theta.to_vec()))
    }
    fn log_jacobian(&self, _theta: &[f64], _u: &[f64]) -> f64 {
        0.0
    }
}
