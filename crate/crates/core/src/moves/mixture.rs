//! Split/merge and birth/death moves for [`MixtureModel`].

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Result, RjError};
use crate::kernel::{acceptance_log_ratio, BetweenModelMove, MoveOutcome};
use crate::model::ChainState;
use crate::models::mixture::{allocation_probs, pack, unpack, Component, MixtureModel};
use crate::rng::ChainRng;
use crate::space::ModelSpace;
use crate::stats::beta_log_pdf;

/// Floor applied to a merged variance lost to cancellation.
pub const MERGE_VARIANCE_FLOOR: f64 = 1e-12;

static MERGE_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// Number of merges whose variance was clamped since process start.
pub fn merge_clamp_count() -> u64 {
    MERGE_CLAMPS.load(Ordering::Relaxed)
}

/// Splits `parent` into two components preserving weight, mean and second
/// moment. Requires `u ∈ (0, 1)³`.
pub fn split_component(parent: &Component, u: [f64; 3]) -> Result<(Component, Component)> {
    let [u1, u2, u3] = u;
    if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0 && u3 > 0.0 && u3 < 1.0) {
        return Err(RjError::DegenerateSplit(format!("auxiliary values {u:?} outside (0, 1)")));
    }
    let w1 = parent.weight * u1;
    let w2 = parent.weight * (1.0 - u1);
    if !(w1 > 0.0 && w2 > 0.0) {
        return Err(RjError::DegenerateSplit("zero split weight".into()));
    }
    let sd = parent.var.sqrt();
    let mu1 = parent.mean - u2 * sd * (w2 / w1).sqrt();
    let mu2 = parent.mean + u2 * sd * (w1 / w2).sqrt();
    let shrink = (1.0 - u2 * u2) * parent.var * parent.weight;
    let var1 = u3 * shrink / w1;
    let var2 = (1.0 - u3) * shrink / w2;
    if !(var1 > 0.0 && var2 > 0.0) || !(var1.is_finite() && var2.is_finite()) {
        return Err(RjError::DegenerateSplit("non-positive split variance".into()));
    }
    Ok((Component::new(w1, mu1, var1), Component::new(w2, mu2, var2)))
}

/// Merged component and the auxiliary values that split it back into `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub parent: Component,
    pub u: [f64; 3],
    /// The merged variance hit [`MERGE_VARIANCE_FLOOR`].
    pub clamped: bool,
}

/// Moment-matching merge of `a` (the lower-mean component) and `b`.
pub fn merge_components(a: &Component, b: &Component) -> Merge {
    let w = a.weight + b.weight;
    let mean = (a.weight * a.mean + b.weight * b.mean) / w;
    let second = (a.weight * (a.mean * a.mean + a.var) + b.weight * (b.mean * b.mean + b.var)) / w;
    let mut var = second - mean * mean;
    let clamped = !(var >= MERGE_VARIANCE_FLOOR);
    if clamped {
        MERGE_CLAMPS.fetch_add(1, Ordering::Relaxed);
        var = MERGE_VARIANCE_FLOOR;
    }
    let u1 = a.weight / w;
    let u2 = (b.mean - a.mean) * (a.weight * b.weight).sqrt() / (var.sqrt() * w);
    let u3 = a.var * a.weight / ((1.0 - u2 * u2) * var * w);
    Merge {
        parent: Component::new(w, mean, var),
        u: [u1, u2, u3],
        clamped,
    }
}

/// `log |∂(w₁, μ₁, σ²₁, w₂, μ₂, σ²₂) / ∂(w*, μ*, σ²*, u₁, u₂, u₃)|` of the split.
pub fn split_log_jacobian(parent: &Component, a: &Component, b: &Component, u: [f64; 3]) -> f64 {
    let [_, u2, u3] = u;
    parent.weight.ln() + (b.mean - a.mean).abs().ln() + a.var.ln() + b.var.ln()
        - u2.ln()
        - (1.0 - u2 * u2).ln()
        - u3.ln()
        - (1.0 - u3).ln()
        - parent.var.ln()
}

/// Split of component `j` of a packed parameter vector into two adjacent
/// entries `j, j + 1`; other components keep their order.
pub fn split_params(params: &[f64], j: usize, u: [f64; 3]) -> Result<Vec<f64>> {
    let mut comps = unpack(params);
    if j >= comps.len() {
        return Err(RjError::DegenerateSplit(format!("component {j} does not exist")));
    }
    let (a, b) = split_component(&comps[j], u)?;
    comps[j] = a;
    comps.insert(j + 1, b);
    Ok(pack(&comps))
}

/// Merge of components `j1` and `j2` of a packed parameter vector; the merged
/// component takes the place of the lower index.
pub fn merge_params(params: &[f64], j1: usize, j2: usize) -> Result<(Vec<f64>, [f64; 3])> {
    let mut comps = unpack(params);
    if j1 == j2 || j1.max(j2) >= comps.len() {
        return Err(RjError::InvalidConfig(format!("cannot merge components {j1} and {j2}")));
    }
    let m = merge_components(&comps[j1], &comps[j2]);
    let (lo, hi) = (j1.min(j2), j1.max(j2));
    comps[lo] = m.parent;
    comps.remove(hi);
    Ok((pack(&comps), m.u))
}

/// Auxiliary laws of the split: `u₁, u₂ ~ Beta(2, 2)`, `u₃ ~ Beta(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitAux {
    pub u1: (f64, f64),
    pub u2: (f64, f64),
    pub u3: (f64, f64),
}

impl Default for SplitAux {
    fn default() -> Self {
        SplitAux {
            u1: (2.0, 2.0),
            u2: (2.0, 2.0),
            u3: (1.0, 1.0),
        }
    }
}

impl SplitAux {
    fn sample(&self, rng: &mut ChainRng) -> [f64; 3] {
        let d = |(a, b): (f64, f64), rng: &mut ChainRng| Beta::new(a, b).expect("valid beta").sample(rng);
        [d(self.u1, rng), d(self.u2, rng), d(self.u3, rng)]
    }

    pub fn log_density(&self, u: [f64; 3]) -> f64 {
        beta_log_pdf(u[0], self.u1.0, self.u1.1) + beta_log_pdf(u[1], self.u2.0, self.u2.1) + beta_log_pdf(u[2], self.u3.0, self.u3.1)
    }
}

/// Log probability of reallocating the members of the split component to
/// `a` or `b` as recorded in `to_a`.
fn reallocation_log_prob(a: &Component, b: &Component, members: &[(f64, bool)]) -> f64 {
    let pair = [Component::new(a.weight, a.mean, a.var), Component::new(b.weight, b.mean, b.var)];
    members
        .iter()
        .map(|&(x, to_a)| {
            let p = allocation_probs(&pair, x);
            if to_a {
                p[0].ln()
            } else {
                p[1].ln()
            }
        })
        .sum()
}

/// Split/merge move between `k` and `k + 1` components.
#[derive(Debug, Clone, Default)]
pub struct SplitMergeMove {
    pub aux: SplitAux,
}

impl SplitMergeMove {
    pub fn new(aux: SplitAux) -> Self {
        SplitMergeMove { aux }
    }

    fn split(&self, model: &MixtureModel, space: &ModelSpace, state: &ChainState, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let k = state.model;
        let comps = unpack(&state.params);
        let j = rng.random_range(0..k);
        let u = self.aux.sample(rng);
        let Ok((a, b)) = split_component(&comps[j], u) else {
            return Ok(MoveOutcome::aborted(state));
        };
        let adjacent = comps
            .iter()
            .enumerate()
            .all(|(i, c)| i == j || !(c.mean > a.mean && c.mean < b.mean));
        if !adjacent {
            return Ok(MoveOutcome::aborted(state));
        }
        let mut new = comps.clone();
        new[j] = a;
        new.insert(j + 1, b);
        let mut z = state.latent.clone();
        let mut members = Vec::new();
        let pair = [a, b];
        for (i, &x) in model.data().iter().enumerate() {
            let l = z[i] as usize;
            if l == j {
                let p = allocation_probs(&pair, x);
                let to_a = rng.random::<f64>() < p[0];
                members.push((x, to_a));
                z[i] = if to_a { j as u32 } else { j as u32 + 1 };
            } else if l > j {
                z[i] += 1;
            }
        }
        let proposed = model.state(&new, z)?;
        let log_alloc = reallocation_log_prob(&a, &b, &members);
        let pick = -(k as f64).ln();
        let log_ratio = acceptance_log_ratio(
            space,
            state,
            &proposed,
            pick + self.aux.log_density(u) + log_alloc,
            pick,
            split_log_jacobian(&comps[j], &a, &b, u),
        );
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }

    fn merge(&self, model: &MixtureModel, space: &ModelSpace, state: &ChainState, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let big = state.model;
        let k = big - 1;
        let comps = unpack(&state.params);
        let j = rng.random_range(0..k);
        let (a, b) = (comps[j], comps[j + 1]);
        let m = merge_components(&a, &b);
        let mut new = comps.clone();
        new[j] = m.parent;
        new.remove(j + 1);
        let mut z = state.latent.clone();
        let mut members = Vec::new();
        for (i, &x) in model.data().iter().enumerate() {
            let l = z[i] as usize;
            if l == j || l == j + 1 {
                members.push((x, l == j));
                z[i] = j as u32;
            } else if l > j + 1 {
                z[i] -= 1;
            }
        }
        let proposed = model.state(&new, z)?;
        let log_alloc = reallocation_log_prob(&a, &b, &members);
        let pick = -(k as f64).ln();
        let log_ratio = acceptance_log_ratio(
            space,
            state,
            &proposed,
            pick,
            pick + self.aux.log_density(m.u) + log_alloc,
            -split_log_jacobian(&m.parent, &a, &b, m.u),
        );
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }
}

impl BetweenModelMove<MixtureModel> for SplitMergeMove {
    fn connects(&self, from: usize, to: usize) -> bool {
        from >= 1 && to >= 1 && from.abs_diff(to) == 1
    }

    fn attempt(&self, model: &MixtureModel, space: &ModelSpace, state: &ChainState, to: usize, rng: &mut ChainRng) -> Result<MoveOutcome> {
        if to == state.model + 1 {
            self.split(model, space, state, rng)
        } else {
            self.merge(model, space, state, rng)
        }
    }
}

/// Birth of an empty component drawn from the prior, and death of a
/// randomly chosen empty component.
#[derive(Debug, Clone, Copy, Default)]
pub struct BirthDeathMove;

impl BirthDeathMove {
    /// Log proposal density of a newborn component `c` in a state that had
    /// `k` components before the birth.
    fn birth_log_density(model: &MixtureModel, c: &Component, k: usize) -> f64 {
        beta_log_pdf(c.weight, 1.0, k as f64) + model.component_prior_log_density(c)
    }

    fn empty_components(state: &ChainState, prior_only: bool) -> Vec<usize> {
        let k = state.model;
        if prior_only {
            return (0..k).collect();
        }
        let mut used = vec![false; k];
        for &l in &state.latent {
            used[l as usize] = true;
        }
        (0..k).filter(|&j| !used[j]).collect()
    }

    fn birth(model: &MixtureModel, space: &ModelSpace, state: &ChainState, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let k = state.model;
        let w = Beta::new(1.0, k as f64).expect("valid beta").sample(rng);
        if !(w > 0.0 && w < 1.0) {
            return Ok(MoveOutcome::aborted(state));
        }
        let newborn = model.draw_component(w, rng);
        let mut comps: Vec<Component> = unpack(&state.params)
            .into_iter()
            .map(|c| Component::new(c.weight * (1.0 - w), c.mean, c.var))
            .collect();
        comps.push(newborn);
        let proposed = model.state(&comps, state.latent.clone())?;
        let empties = Self::empty_components(&proposed, model.prior_only()).len();
        let log_ratio = acceptance_log_ratio(
            space,
            state,
            &proposed,
            Self::birth_log_density(model, &newborn, k),
            -(empties as f64).ln(),
            (k as f64 - 1.0) * (1.0 - w).ln(),
        );
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }

    fn death(model: &MixtureModel, space: &ModelSpace, state: &ChainState, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let empties = Self::empty_components(state, model.prior_only());
        if empties.is_empty() {
            return Ok(MoveOutcome::aborted(state));
        }
        let j = empties[rng.random_range(0..empties.len())];
        let comps = unpack(&state.params);
        let dead = comps[j];
        let k = state.model - 1;
        let kept: Vec<Component> = comps
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, c)| Component::new(c.weight / (1.0 - dead.weight), c.mean, c.var))
            .collect();
        let z = state
            .latent
            .iter()
            .map(|&l| if l as usize > j { l - 1 } else { l })
            .collect();
        let proposed = model.state(&kept, z)?;
        let log_ratio = acceptance_log_ratio(
            space,
            state,
            &proposed,
            -(empties.len() as f64).ln(),
            Self::birth_log_density(model, &dead, k),
            -(k as f64 - 1.0) * (1.0 - dead.weight).ln(),
        );
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }
}

impl BetweenModelMove<MixtureModel> for BirthDeathMove {
    fn connects(&self, from: usize, to: usize) -> bool {
        from >= 1 && to >= 1 && from.abs_diff(to) == 1
    }

    fn attempt(&self, model: &MixtureModel, space: &ModelSpace, state: &ChainState, to: usize, rng: &mut ChainRng) -> Result<MoveOutcome> {
        if to == state.model + 1 {
            Self::birth(model, space, state, rng)
        } else {
            Self::death(model, space, state, rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_example() {
        let (a, b) = split_component(&Component::new(0.5, 0.0, 1.0), [0.5, 0.5, 0.5]).unwrap();
        for (c, m) in [(a, -0.5), (b, 0.5)] {
            assert!((c.weight - 0.25).abs() < 1e-15);
            assert!((c.mean - m).abs() < 1e-15);
            assert!((c.var - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn merge_example() {
        let m = merge_components(&Component::new(0.25, -0.5, 0.75), &Component::new(0.25, 0.5, 0.75));
        assert!((m.parent.weight - 0.5).abs() < 1e-15);
        assert!(m.parent.mean.abs() < 1e-15);
        assert!((m.parent.var - 1.0).abs() < 1e-15);
        for x in m.u {
            assert!((x - 0.5).abs() < 1e-15);
        }
        assert!(!m.clamped);
    }

    #[test]
    fn merge_identical() {
        let c = Component::new(0.2, 1.5, 0.3);
        let m = merge_components(&c, &c);
        assert!((m.parent.weight - 0.4).abs() < 1e-15);
        assert!((m.parent.mean - 1.5).abs() < 1e-15);
        assert!((m.parent.var - 0.3).abs() < 1e-14);
    }

    #[test]
    fn degenerate_split_rejected() {
        let p = Component::new(0.5, 0.0, 1.0);
        assert!(split_component(&p, [1.0, 0.5, 0.5]).is_err());
        assert!(split_component(&p, [0.5, 0.0, 0.5]).is_err());
        assert!(split_component(&p, [0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn merge_clamps_cancelled_variance() {
        let before = merge_clamp_count();
        let tiny = Component::new(0.5, 1e8, 1e-30);
        let m = merge_components(&tiny, &tiny);
        assert!(m.clamped);
        assert_eq!(m.parent.var, MERGE_VARIANCE_FLOOR);
        assert!(merge_clamp_count() > before);
    }
}
