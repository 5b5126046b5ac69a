//! Poisson processes on `[0, T]` with a piecewise-constant rate.
//!
//! A state with `k` change-points has parameters
//! `[s₁…s_k, h₀…h_k]`: ordered interior positions and the `k + 1` step
//! heights.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RjError};
use crate::kernel::{acceptance_log_ratio, acceptance_probability, accept, BetweenModelMove, MoveOutcome};
use crate::model::{ChainState, Model};
use crate::rng::ChainRng;
use crate::space::ModelSpace;
use crate::stats::{gamma_log_pdf, ln_factorial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangePointHyper {
    pub k_max: usize,
    /// Mean of the truncated Poisson prior on the number of change-points.
    pub poisson_rate: f64,
    pub height_shape: f64,
    /// Gamma rate of the heights; `None` uses `T / n_events`.
    pub height_rate: Option<f64>,
}

impl Default for ChangePointHyper {
    fn default() -> Self {
        ChangePointHyper {
            k_max: 10,
            poisson_rate: 1.0,
            height_shape: 1.0,
            height_rate: None,
        }
    }
}

fn split_params(params: &[f64]) -> (&[f64], &[f64]) {
    let k = params.len() / 2;
    params.split_at(k)
}

/// Boundaries `0 = s₀ < s₁ < … < s_k < s_{k+1} = T`, or `None` if the
/// positions are not strictly increasing inside `(0, T)`.
fn boundaries(positions: &[f64], horizon: f64) -> Option<Vec<f64>> {
    let mut b = Vec::with_capacity(positions.len() + 2);
    b.push(0.0);
    for &s in positions {
        if !(s > *b.last().unwrap()) {
            return None;
        }
        b.push(s);
    }
    if !(horizon > *b.last().unwrap()) {
        return None;
    }
    b.push(horizon);
    Some(b)
}

/// `Σᵢ log h(tᵢ) − ∫₀ᵀ h(t) dt`. Events must be sorted.
pub fn changepoint_log_likelihood(params: &[f64], events: &[f64], horizon: f64) -> Result<f64> {
    if events.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(RjError::Evaluation("event time outside [0, T]".into()));
    }
    let (positions, heights) = split_params(params);
    let Some(b) = boundaries(positions, horizon) else {
        return Ok(f64::NEG_INFINITY);
    };
    if heights.len() != positions.len() + 1 || heights.iter().any(|h| !(*h > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut ll = 0.0;
    let mut start = 0;
    for (j, &h) in heights.iter().enumerate() {
        let end = if j + 1 == heights.len() {
            events.len()
        } else {
            start + events[start..].partition_point(|&t| t < b[j + 1])
        };
        ll += (end - start) as f64 * h.ln() - h * (b[j + 1] - b[j]);
        start = end;
    }
    Ok(ll)
}

/// Prior of the positions (even order statistics of `2k + 1` uniforms on
/// `(0, T)`) and the Gamma heights, given `k`.
pub fn changepoint_log_prior(params: &[f64], horizon: f64, height_shape: f64, height_rate: f64) -> f64 {
    let (positions, heights) = split_params(params);
    let Some(b) = boundaries(positions, horizon) else {
        return f64::NEG_INFINITY;
    };
    let k = positions.len();
    let mut lp = ln_factorial(2 * k + 1) - (2 * k + 1) as f64 * horizon.ln();
    lp += b.windows(2).map(|w| (w[1] - w[0]).ln()).sum::<f64>();
    lp + heights.iter().map(|&h| gamma_log_pdf(h, height_shape, height_rate)).sum::<f64>()
}

/// Full log posterior including the truncated Poisson prior on `k`.
pub fn changepoint_log_posterior(params: &[f64], events: &[f64], horizon: f64, hyper: &ChangePointHyper) -> Result<f64> {
    let rate = hyper.height_rate.unwrap_or(horizon / events.len().max(1) as f64);
    let space = ModelSpace::truncated_poisson(0, hyper.k_max, hyper.poisson_rate);
    let k = params.len() / 2;
    let ll = changepoint_log_likelihood(params, events, horizon)?;
    Ok(ll + changepoint_log_prior(params, horizon, hyper.height_shape, rate) + space.log_model_prior(k))
}

#[derive(Debug, Clone)]
pub struct ChangePointModel {
    events: Vec<f64>,
    horizon: f64,
    hyper: ChangePointHyper,
    height_rate: f64,
}

impl ChangePointModel {
    pub fn new(mut events: Vec<f64>, horizon: f64, hyper: ChangePointHyper) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(RjError::InvalidConfig("horizon must be positive".into()));
        }
        if events.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
            return Err(RjError::Evaluation("event time outside [0, T]".into()));
        }
        if !(hyper.poisson_rate > 0.0) || !(hyper.height_shape > 0.0) || hyper.height_rate.is_some_and(|r| !(r > 0.0)) {
            return Err(RjError::InvalidConfig("change-point prior parameters must be positive".into()));
        }
        events.sort_by(f64::total_cmp);
        let height_rate = hyper.height_rate.unwrap_or(horizon / events.len().max(1) as f64);
        Ok(ChangePointModel {
            events,
            horizon,
            hyper,
            height_rate,
        })
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn hyper(&self) -> &ChangePointHyper {
        &self.hyper
    }

    /// Truncated Poisson prior on `0..=k_max` with nearest-neighbour jumps.
    pub fn space(&self) -> ModelSpace {
        ModelSpace::truncated_poisson(0, self.hyper.k_max, self.hyper.poisson_rate)
    }
}

/// Reflects `x` into `(lo, hi)`.
fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    x = (x - lo).rem_euclid(2.0 * width);
    if x > width {
        x = 2.0 * width - x;
    }
    lo + x
}

impl Model for ChangePointModel {
    fn dimension(&self, k: usize) -> usize {
        2 * k + 1
    }

    fn log_likelihood(&self, _k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        changepoint_log_likelihood(params, &self.events, self.horizon).unwrap_or(f64::NEG_INFINITY)
    }

    fn log_prior(&self, k: usize, params: &[f64], _latent: &[u32]) -> f64 {
        if k > self.hyper.k_max {
            return f64::NEG_INFINITY;
        }
        changepoint_log_prior(params, self.horizon, self.hyper.height_shape, self.height_rate)
    }

    fn sample_prior(&self, k: usize, rng: &mut ChainRng) -> (Vec<f64>, Vec<u32>) {
        let mut u: Vec<f64> = (0..2 * k + 1).map(|_| rng.random::<f64>() * self.horizon).collect();
        u.sort_by(f64::total_cmp);
        let mut params: Vec<f64> = (0..k).map(|j| u[2 * j + 1]).collect();
        let g = Gamma::new(self.hyper.height_shape, 1.0 / self.height_rate).expect("valid gamma");
        params.extend((0..=k).map(|_| g.sample(rng)));
        (params, Vec::new())
    }

    /// One Metropolis update per coordinate: positions by a random walk
    /// reflected into the interval between their neighbours (sd
    /// `scales[j]·T`), heights by a log-scale random walk (sd `scales[k+j]`).
    fn within_model_step(&self, mut state: ChainState, scales: &[f64], rng: &mut ChainRng) -> Result<ChainState> {
        let k = state.model;
        if scales.len() != 2 * k + 1 {
            return Err(RjError::dims("change-point scales", 2 * k + 1, scales.len()));
        }
        for j in 0..k {
            let lo = if j == 0 { 0.0 } else { state.params[j - 1] };
            let hi = if j + 1 == k { self.horizon } else { state.params[j + 1] };
            let mut p = state.params.clone();
            p[j] = reflect(p[j] + scales[j] * self.horizon * rng.sample::<f64, _>(StandardNormal), lo, hi);
            let cand = ChainState::evaluate(self, k, p, Vec::new())?;
            if accept(acceptance_probability(cand.log_density() - state.log_density()), rng) && cand.is_finite() {
                state = cand;
            }
        }
        for j in 0..=k {
            let mut p = state.params.clone();
            let step = scales[k + j] * rng.sample::<f64, _>(StandardNormal);
            p[k + j] *= step.exp();
            let cand = ChainState::evaluate(self, k, p, Vec::new())?;
            let log_ratio = cand.log_density() - state.log_density() + step;
            if accept(acceptance_probability(log_ratio), rng) && cand.is_finite() {
                state = cand;
            }
        }
        Ok(state)
    }

    fn param_labels(&self, k: usize) -> Vec<(&'static str, usize)> {
        let mut labels: Vec<_> = (0..k).map(|j| ("position", j)).collect();
        labels.extend((0..=k).map(|j| ("height", j)));
        labels
    }
}

/// Birth of a change-point at a uniform position, splitting the height of
/// the segment it falls in so the integrated rate is preserved, and the
/// matching death of a uniformly chosen change-point.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChangePointBirthDeath;

/// `(h, u) ↦ (h₁, h₂)` with `l₁h₁ = uLh` and `l₂h₂ = (1 − u)Lh`.
pub fn split_height(h: f64, u: f64, l1: f64, l2: f64) -> (f64, f64) {
    let l = l1 + l2;
    (u * l * h / l1, (1.0 - u) * l * h / l2)
}

/// Inverse of [`split_height`]: `(h, u)`.
pub fn merge_heights(h1: f64, h2: f64, l1: f64, l2: f64) -> (f64, f64) {
    let mass = l1 * h1 + l2 * h2;
    (mass / (l1 + l2), l1 * h1 / mass)
}

/// `log |∂(h₁, h₂)/∂(h, u)| = log(L²h / (l₁l₂))`.
pub fn split_height_log_jacobian(h: f64, l1: f64, l2: f64) -> f64 {
    2.0 * (l1 + l2).ln() + h.ln() - l1.ln() - l2.ln()
}

impl ChangePointBirthDeath {
    fn birth(model: &ChangePointModel, space: &ModelSpace, state: &ChainState, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let k = state.model;
        let (positions, heights) = split_params(&state.params);
        let s = rng.random::<f64>() * model.horizon;
        let u = rng.random::<f64>();
        let j = positions.partition_point(|&p| p < s);
        let lo = if j == 0 { 0.0 } else { positions[j - 1] };
        let hi = if j == k { model.horizon } else { positions[j] };
        let (l1, l2) = (s - lo, hi - s);
        if !(l1 > 0.0 && l2 > 0.0 && u > 0.0) {
            return Ok(MoveOutcome::aborted(state));
        }
        let (h1, h2) = split_height(heights[j], u, l1, l2);
        let mut new_pos = positions.to_vec();
        new_pos.insert(j, s);
        let mut new_h = heights.to_vec();
        new_h[j] = h1;
        new_h.insert(j + 1, h2);
        new_pos.extend(new_h);
        let proposed = ChainState::evaluate(model, k + 1, new_pos, Vec::new())?;
        let log_ratio = acceptance_log_ratio(
            space,
            state,
            &proposed,
            -model.horizon.ln(),
            -((k + 1) as f64).ln(),
            split_height_log_jacobian(heights[j], l1, l2),
        );
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }

    fn death(model: &ChangePointModel, space: &ModelSpace, state: &ChainState, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let k = state.model;
        let (positions, heights) = split_params(&state.params);
        let j = rng.random_range(0..k);
        let lo = if j == 0 { 0.0 } else { positions[j - 1] };
        let hi = if j + 1 == k { model.horizon } else { positions[j + 1] };
        let (l1, l2) = (positions[j] - lo, hi - positions[j]);
        let (h, _u) = merge_heights(heights[j], heights[j + 1], l1, l2);
        let mut new_pos: Vec<f64> = positions.to_vec();
        new_pos.remove(j);
        let mut new_h = heights.to_vec();
        new_h[j] = h;
        new_h.remove(j + 1);
        new_pos.extend(new_h);
        let proposed = ChainState::evaluate(model, k - 1, new_pos, Vec::new())?;
        let log_ratio = acceptance_log_ratio(
            space,
            state,
            &proposed,
            -(k as f64).ln(),
            -model.horizon.ln(),
            -split_height_log_jacobian(h, l1, l2),
        );
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }
}

impl BetweenModelMove<ChangePointModel> for ChangePointBirthDeath {
    fn connects(&self, from: usize, to: usize) -> bool {
        from.abs_diff(to) == 1
    }

    fn attempt(&self, model: &ChangePointModel, space: &ModelSpace, state: &ChainState, to: usize, rng: &mut ChainRng) -> Result<MoveOutcome> {
        if to == state.model + 1 {
            Self::birth(model, space, state, rng)
        } else {
            Self::death(model, space, state, rng)
        }
    }
}

/// Simulates event times on `[0, T]` for the step rate `params`.
pub fn simulate_changepoint(params: &[f64], horizon: f64, rng: &mut ChainRng) -> Result<Vec<f64>> {
    let (positions, heights) = split_params(params);
    let b = boundaries(positions, horizon).ok_or_else(|| RjError::InvalidConfig("positions must be increasing inside (0, T)".into()))?;
    if heights.len() != positions.len() + 1 || heights.iter().any(|h| !(*h > 0.0)) {
        return Err(RjError::InvalidConfig("one positive height per segment".into()));
    }
    let mut events = Vec::new();
    for (j, &h) in heights.iter().enumerate() {
        let (lo, hi) = (b[j], b[j + 1]);
        let n = Poisson::new(h * (hi - lo)).map_err(|e| RjError::InvalidConfig(e.to_string()))?.sample(rng) as usize;
        events.extend((0..n).map(|_| lo + rng.random::<f64>() * (hi - lo)));
    }
    events.sort_by(f64::total_cmp);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn homogeneous_likelihood() {
        let events = [0.5, 1.0, 7.0];
        let ll = changepoint_log_likelihood(&[2.0], &events, 10.0).unwrap();
        assert!((ll - (3.0 * 2f64.ln() - 20.0)).abs() < 1e-12);
        let void = changepoint_log_likelihood(&[2.0], &[], 10.0).unwrap();
        assert!((void + 20.0).abs() < 1e-12);
    }

    #[test]
    fn event_outside_horizon_is_an_error() {
        assert!(changepoint_log_likelihood(&[1.0], &[11.0], 10.0).is_err());
        assert!(ChangePointModel::new(vec![-1.0], 10.0, ChangePointHyper::default()).is_err());
    }

    #[test]
    fn unordered_positions_excluded() {
        let p = [6.0, 3.0, 1.0, 1.0, 1.0];
        assert_eq!(changepoint_log_likelihood(&p, &[], 10.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(changepoint_log_prior(&p, 10.0, 1.0, 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn height_split_round_trip() {
        let (h1, h2) = split_height(3.0, 0.3, 2.0, 5.0);
        assert!((2.0 * h1 + 5.0 * h2 - 21.0).abs() < 1e-12);
        let (h, u) = merge_heights(h1, h2, 2.0, 5.0);
        assert!((h - 3.0).abs() < 1e-12 && (u - 0.3).abs() < 1e-12);
    }

    #[test]
    fn position_prior_integrates_to_one_for_one_point() {
        let t = 4.0;
        let n = 100_000;
        let h = t / n as f64;
        let total: f64 = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                (changepoint_log_prior(&[s, 1.0, 1.0], t, 1.0, 1.0) - 2.0 * gamma_log_pdf(1.0, 1.0, 1.0)).exp() * h
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn simulation_mean_count() {
        let mut rng = ChainRng::seed_from_u64(8);
        let reps = 2000;
        let total: usize = (0..reps).map(|_| simulate_changepoint(&[2.0], 10.0, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 20.0).abs() < 3.0 * (20.0f64 / reps as f64).sqrt() * 3.0);
    }
}
