//! Generic between-model moves built from a bijective dimension-matching map.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, StandardNormal};

use crate::error::{Result, RjError};
use crate::kernel::{acceptance_log_ratio, BetweenModelMove, MoveOutcome};
use crate::model::{ChainState, Model};
use crate::rng::ChainRng;
use crate::space::ModelSpace;
use crate::stats::{beta_log_pdf, normal_log_pdf, std_normal_log_pdf};

/// A bijection `(θ_k, u) ↔ (θ′_{k′}, u′)` between model `source` and model
/// `target`.
pub trait DimensionMap: Send + Sync {
    fn source(&self) -> usize;
    fn target(&self) -> usize;
    /// `g_{k→k′}(θ, u) = (θ′, u′)`.
    fn forward(&self, theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    /// `g_{k′→k}(θ′, u′) = (θ, u)`.
    fn inverse(&self, theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    /// `log |∂g_{k→k′}(θ, u) / ∂(θ, u)|`.
    fn log_jacobian(&self, theta: &[f64], u: &[f64]) -> f64;
}

/// Density (or mass function) of an auxiliary random vector.
pub trait AuxDensity: Send + Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut ChainRng) -> Vec<f64>;
    fn log_density(&self, u: &[f64]) -> f64;
}

/// Zero-dimensional auxiliary vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoAux;

impl AuxDensity for NoAux {
    fn dim(&self) -> usize {
        0
    }
    fn sample(&self, _rng: &mut ChainRng) -> Vec<f64> {
        Vec::new()
    }
    fn log_density(&self, u: &[f64]) -> f64 {
        if u.is_empty() {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Independent `N(0, 1)` coordinates.
#[derive(Debug, Clone, Copy)]
pub struct StdNormalAux(pub usize);

impl AuxDensity for StdNormalAux {
    fn dim(&self) -> usize {
        self.0
    }
    fn sample(&self, rng: &mut ChainRng) -> Vec<f64> {
        (0..self.0).map(|_| rng.sample(StandardNormal)).collect()
    }
    fn log_density(&self, u: &[f64]) -> f64 {
        u.iter().map(|&x| std_normal_log_pdf(x)).sum()
    }
}

/// Scalar `N(mean, sd²)`.
#[derive(Debug, Clone, Copy)]
pub struct NormalAux {
    pub mean: f64,
    pub sd: f64,
}

impl AuxDensity for NormalAux {
    fn dim(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut ChainRng) -> Vec<f64> {
        vec![self.mean + self.sd * rng.sample::<f64, _>(StandardNormal)]
    }
    fn log_density(&self, u: &[f64]) -> f64 {
        normal_log_pdf(u[0], self.mean, self.sd * self.sd)
    }
}

/// Scalar `Beta(a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct BetaAux {
    pub a: f64,
    pub b: f64,
}

impl AuxDensity for BetaAux {
    fn dim(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut ChainRng) -> Vec<f64> {
        vec![BetaDist::new(self.a, self.b).expect("valid beta parameters").sample(rng)]
    }
    fn log_density(&self, u: &[f64]) -> f64 {
        beta_log_pdf(u[0], self.a, self.b)
    }
}

/// Scalar on `{0, 1, …, m − 1}` with the given probabilities.
#[derive(Debug, Clone)]
pub struct DiscreteAux {
    probs: Vec<f64>,
}

impl DiscreteAux {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(RjError::InvalidConfig("discrete weights must be non-negative with positive sum".into()));
        }
        Ok(DiscreteAux {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl AuxDensity for DiscreteAux {
    fn dim(&self) -> usize {
        1
    }
    fn sample(&self, rng: &mut ChainRng) -> Vec<f64> {
        let mut u = rng.random::<f64>();
        for (i, p) in self.probs.iter().enumerate() {
            if u < *p {
                return vec![i as f64];
            }
            u -= p;
        }
        let last = self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        vec![last as f64]
    }
    fn log_density(&self, u: &[f64]) -> f64 {
        let i = u[0];
        if i < 0.0 || i.fract() != 0.0 || i as usize >= self.probs.len() {
            return f64::NEG_INFINITY;
        }
        self.probs[i as usize].ln()
    }
}

/// Accumulated terms of one proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub state: ChainState,
    pub log_ratio: f64,
    /// Auxiliary draw of the proposing direction.
    pub aux: Vec<f64>,
    /// Auxiliary vector recovered for the reverse direction.
    pub reverse_aux: Vec<f64>,
}

/// A between-model move `source ↔ target` defined by a [`DimensionMap`] and
/// the densities of `u` (drawn when moving up to `target`) and `u′` (drawn
/// when moving back to `source`).
pub struct JumpMove {
    map: Box<dyn DimensionMap>,
    forward_aux: Box<dyn AuxDensity>,
    reverse_aux: Box<dyn AuxDensity>,
}

impl JumpMove {
    /// Checks dimension matching `n_k + d = n_{k′} + d′` against `model`.
    pub fn new<M: Model + ?Sized>(
        model: &M,
        map: impl DimensionMap + 'static,
        forward_aux: impl AuxDensity + 'static,
        reverse_aux: impl AuxDensity + 'static,
    ) -> Result<Self> {
        let lhs = model.dimension(map.source()) + forward_aux.dim();
        let rhs = model.dimension(map.target()) + reverse_aux.dim();
        if lhs != rhs {
            return Err(RjError::dims(
                format!("dimension matching {} -> {}", map.source(), map.target()),
                lhs,
                rhs,
            ));
        }
        Ok(JumpMove {
            map: Box::new(map),
            forward_aux: Box::new(forward_aux),
            reverse_aux: Box::new(reverse_aux),
        })
    }

    pub fn source(&self) -> usize {
        self.map.source()
    }

    pub fn target(&self) -> usize {
        self.map.target()
    }

    pub fn map(&self) -> &dyn DimensionMap {
        self.map.as_ref()
    }

    pub fn forward_aux(&self) -> &dyn AuxDensity {
        self.forward_aux.as_ref()
    }

    pub fn reverse_aux(&self) -> &dyn AuxDensity {
        self.reverse_aux.as_ref()
    }

    /// Auxiliary density of the direction leaving model `from`.
    pub fn aux_for(&self, from: usize) -> &dyn AuxDensity {
        if from == self.source() {
            self.forward_aux()
        } else {
            self.reverse_aux()
        }
    }

    /// Builds the proposal from `state` with the auxiliary draw `aux`:
    /// `u` for an up move from `source`, `u′` for a down move from `target`.
    pub fn propose_with<M: Model + ?Sized>(
        &self,
        model: &M,
        space: &ModelSpace,
        state: &ChainState,
        aux: &[f64],
    ) -> Result<Proposal> {
        let up = state.model == self.source();
        if !up && state.model != self.target() {
            return Err(RjError::NoMove {
                from: state.model,
                to: self.source(),
            });
        }
        let expected = self.aux_for(state.model).dim();
        if aux.len() != expected {
            return Err(RjError::dims("auxiliary vector", expected, aux.len()));
        }
        let (to, (theta, back), log_q_forward, log_jacobian);
        if up {
            to = self.target();
            (theta, back) = self.map.forward(&state.params, aux)?;
            log_q_forward = self.forward_aux.log_density(aux);
            log_jacobian = self.map.log_jacobian(&state.params, aux);
        } else {
            to = self.source();
            (theta, back) = self.map.inverse(&state.params, aux)?;
            log_q_forward = self.reverse_aux.log_density(aux);
            log_jacobian = -self.map.log_jacobian(&theta, &back);
        }
        let back_density = if up { self.reverse_aux.as_ref() } else { self.forward_aux.as_ref() };
        if back.len() != back_density.dim() {
            return Err(RjError::dims("recovered auxiliary vector", back_density.dim(), back.len()));
        }
        let log_q_reverse = back_density.log_density(&back);
        let proposed = ChainState::evaluate(model, to, theta, state.latent.clone())?;
        let log_ratio = acceptance_log_ratio(space, state, &proposed, log_q_forward, log_q_reverse, log_jacobian);
        Ok(Proposal {
            state: proposed,
            log_ratio,
            aux: aux.to_vec(),
            reverse_aux: back,
        })
    }

    /// Draws the auxiliary vector and builds the proposal.
    pub fn propose<M: Model + ?Sized>(
        &self,
        model: &M,
        space: &ModelSpace,
        state: &ChainState,
        rng: &mut ChainRng,
    ) -> Result<Proposal> {
        let aux = self.aux_for(state.model).sample(rng);
        self.propose_with(model, space, state, &aux)
    }
}

impl<M: Model + ?Sized> BetweenModelMove<M> for JumpMove {
    fn connects(&self, from: usize, to: usize) -> bool {
        (from == self.source() && to == self.target()) || (from == self.target() && to == self.source())
    }

    fn attempt(&self, model: &M, space: &ModelSpace, state: &ChainState, _to: usize, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let proposal = self.propose(model, space, state, rng)?;
        Ok(MoveOutcome::decide(state, proposal.state, proposal.log_ratio, rng))
    }
}

/// `θ⁽¹⁾ = θ* + u`, `θ⁽²⁾ = θ* − u` from a scalar model to a two-parameter one.
#[derive(Debug, Clone, Copy)]
pub struct MeanSplitMap {
    pub source: usize,
    pub target: usize,
}

impl DimensionMap for MeanSplitMap {
    fn source(&self) -> usize {
        self.source
    }
    fn target(&self) -> usize {
        self.target
    }
    fn forward(&self, theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![theta[0] + u[0], theta[0] - u[0]], Vec::new()))
    }
    fn inverse(&self, theta: &[f64], _u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((vec![0.5 * (theta[0] + theta[1])], vec![0.5 * (theta[0] - theta[1])]))
    }
    fn log_jacobian(&self, _theta: &[f64], _u: &[f64]) -> f64 {
        std::f64::consts::LN_2
    }
}

/// Appends `scale · u` to `θ`: `(θ, u) ↦ (θ, scale·u)`.
#[derive(Debug, Clone, Copy)]
pub struct AppendScaledMap {
    pub source: usize,
    pub target: usize,
    pub scale: f64,
}

impl DimensionMap for AppendScaledMap {
    fn source(&self) -> usize {
        self.source
    }
    fn target(&self) -> usize {
        self.target
    }
    fn forward(&self, theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut out = theta.to_vec();
        out.extend(u.iter().map(|x| self.scale * x));
        Ok((out, Vec::new()))
    }
    fn inverse(&self, theta: &[f64], _u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = theta.len() - 1;
        Ok((theta[..n].to_vec(), vec![theta[n] / self.scale]))
    }
    fn log_jacobian(&self, _theta: &[f64], u: &[f64]) -> f64 {
        u.len() as f64 * self.scale.abs().ln()
    }
}

/// Log absolute determinant of the Jacobian of `map.forward` at `(θ, u)` by
/// central finite differences with step `h`. The output vector is `(θ′, u′)`.
pub fn finite_difference_log_jacobian(map: &dyn DimensionMap, theta: &[f64], u: &[f64], h: f64) -> Result<f64> {
    let n = theta.len();
    let input: Vec<f64> = theta.iter().chain(u).copied().collect();
    let eval = |x: &[f64]| -> Result<Vec<f64>> {
        let (a, b) = map.forward(&x[..n], &x[n..])?;
        Ok(a.into_iter().chain(b).collect())
    };
    let base = eval(&input)?;
    let m = input.len();
    if base.len() != m {
        return Err(RjError::dims("finite-difference Jacobian", m, base.len()));
    }
    let mut jac = nalgebra::DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let step = h * input[j].abs().max(1.0);
        let mut plus = input.clone();
        let mut minus = input.clone();
        plus[j] += step;
        minus[j] -= step;
        let fp = eval(&plus)?;
        let fm = eval(&minus)?;
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok(jac.determinant().abs().ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn mean_split_example() {
        let map = MeanSplitMap { source: 1, target: 2 };
        let (t, back) = map.forward(&[3.0], &[1.0]).unwrap();
        assert_eq!(t, vec![4.0, 2.0]);
        assert!(back.is_empty());
        let (s, u) = map.inverse(&[4.0, 2.0], &[]).unwrap();
        assert_eq!(s, vec![3.0]);
        assert_eq!(u, vec![1.0]);
    }

    #[test]
    fn mean_split_jacobian_is_two() {
        let map = MeanSplitMap { source: 1, target: 2 };
        let fd = finite_difference_log_jacobian(&map, &[0.3], &[-1.2], 1e-6).unwrap();
        assert!((fd.exp() - 2.0).abs() < 1e-8);
        assert_eq!(map.log_jacobian(&[0.3], &[-1.2]), 2f64.ln());
    }

    #[test]
    fn discrete_aux_masses() {
        let d = DiscreteAux::new(vec![1.0, 3.0]).unwrap();
        assert!((d.log_density(&[1.0]) - 0.75f64.ln()).abs() < 1e-15);
        assert_eq!(d.log_density(&[2.0]), f64::NEG_INFINITY);
        assert_eq!(d.log_density(&[0.5]), f64::NEG_INFINITY);
        let mut rng = ChainRng::seed_from_u64(3);
        let ones = (0..20_000).filter(|_| d.sample(&mut rng)[0] == 1.0).count();
        assert!((ones as f64 / 20_000.0 - 0.75).abs() < 0.02);
        assert!(DiscreteAux::new(vec![0.0]).is_err());
    }

    #[test]
    fn append_scaled_round_trip() {
        let map = AppendScaledMap { source: 1, target: 2, scale: 2.5 };
        let (t, _) = map.forward(&[1.0, -2.0], &[0.4]).unwrap();
        assert_eq!(t, vec![1.0, -2.0, 1.0]);
        let (s, u) = map.inverse(&t, &[]).unwrap();
        assert_eq!(s, vec![1.0, -2.0]);
        assert!((u[0] - 0.4).abs() < 1e-15);
    }
}
