//! The reversible jump kernel: acceptance ratios, within-model Metropolis
//! updates and the between-model transition.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RjError};
use crate::model::{ChainState, Model};
use crate::rng::ChainRng;
use crate::space::ModelSpace;

/// Log acceptance ratio `log A` of a proposed move `current → proposed`.
///
/// `log_q_forward` is the log density of everything drawn to make the
/// proposal (auxiliary vector `u`, discrete choices), `log_q_reverse` the same
/// for the reverse move (`u′`), and `log_jacobian` the log absolute Jacobian of
/// the forward mapping. The model-jump probabilities `q(k→k′)`, `q(k′→k)` and
/// the model prior come from `space`. A non-finite density on either side
/// yields `−∞`.
pub fn acceptance_log_ratio(
    space: &ModelSpace,
    current: &ChainState,
    proposed: &ChainState,
    log_q_forward: f64,
    log_q_reverse: f64,
    log_jacobian: f64,
) -> f64 {
    if !current.is_finite() || !proposed.is_finite() {
        return f64::NEG_INFINITY;
    }
    let target = proposed.log_target(space) - current.log_target(space);
    let jumps = if current.model == proposed.model {
        0.0
    } else {
        space.jump_prob(proposed.model, current.model).ln()
            - space.jump_prob(current.model, proposed.model).ln()
    };
    let ratio = target + jumps + log_q_reverse - log_q_forward + log_jacobian;
    if ratio.is_nan() {
        f64::NEG_INFINITY
    } else {
        ratio
    }
}

/// `min(1, exp(log_ratio))`, computed without exponentiating large ratios.
pub fn acceptance_probability(log_ratio: f64) -> f64 {
    if log_ratio >= 0.0 {
        1.0
    } else if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.exp()
    }
}

/// Draws the accept/reject decision for acceptance probability `alpha`.
pub fn accept(alpha: f64, rng: &mut ChainRng) -> bool {
    alpha >= 1.0 || rng.random::<f64>() < alpha
}

/// Gaussian random-walk Metropolis update of all coordinates of `θ_k` at once,
/// with per-coordinate proposal standard deviations `scales`.
pub fn mh_within_model_step<M: Model + ?Sized>(
    model: &M,
    state: ChainState,
    scales: &[f64],
    rng: &mut ChainRng,
) -> Result<ChainState> {
    tempered_mh_step(model, state, 1.0, scales, rng)
}

/// Random-walk Metropolis update targeting `(p(θ|k) L)^temper`.
pub fn tempered_mh_step<M: Model + ?Sized>(
    model: &M,
    state: ChainState,
    temper: f64,
    scales: &[f64],
    rng: &mut ChainRng,
) -> Result<ChainState> {
    let n = state.params.len();
    if n == 0 {
        return Ok(state);
    }
    if scales.len() != n {
        return Err(RjError::dims("random-walk scales", n, scales.len()));
    }
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(RjError::InvalidConfig("random-walk scales must be positive".into()));
    }
    let proposal: Vec<f64> = state
        .params
        .iter()
        .zip(scales)
        .map(|(x, s)| x + s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let candidate = ChainState::evaluate(model, state.model, proposal, state.latent.clone())?;
    if !candidate.is_finite() {
        return Ok(state);
    }
    let log_ratio = temper * (candidate.log_density() - state.log_density());
    if accept(acceptance_probability(log_ratio), rng) {
        Ok(candidate)
    } else {
        Ok(state)
    }
}

/// Result of one between-model attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    /// The new state if accepted, otherwise the unchanged input.
    pub state: ChainState,
    /// Acceptance probability of the attempt, in `[0, 1]`.
    pub alpha: f64,
    pub accepted: bool,
}

impl MoveOutcome {
    /// Aborted proposal: counts as a rejection with zero acceptance probability.
    pub fn aborted(state: &ChainState) -> Self {
        MoveOutcome {
            state: state.clone(),
            alpha: 0.0,
            accepted: false,
        }
    }

    /// Metropolis–Hastings decision between `current` and `proposed`.
    pub fn decide(current: &ChainState, proposed: ChainState, log_ratio: f64, rng: &mut ChainRng) -> Self {
        let alpha = acceptance_probability(log_ratio);
        if accept(alpha, rng) {
            MoveOutcome {
                state: proposed,
                alpha,
                accepted: true,
            }
        } else {
            MoveOutcome {
                state: current.clone(),
                alpha,
                accepted: false,
            }
        }
    }
}

/// A between-model transition kernel. Implementations must be
/// bidirectional: `connects(a, b) == connects(b, a)`.
pub trait BetweenModelMove<M: ?Sized>: Send + Sync {
    fn connects(&self, from: usize, to: usize) -> bool;

    /// Attempts a move from `state` into model `to`.
    fn attempt(
        &self,
        model: &M,
        space: &ModelSpace,
        state: &ChainState,
        to: usize,
        rng: &mut ChainRng,
    ) -> Result<MoveOutcome>;
}

/// Weighted collection of between-model moves. For a sampled jump `k → k′`
/// one move among those connecting the pair is picked with probability
/// proportional to its weight; the same weights apply in reverse, so the
/// selection probabilities cancel in the acceptance ratio.
pub struct MoveSet<M: ?Sized> {
    moves: Vec<(f64, Box<dyn BetweenModelMove<M>>)>,
}

impl<M: ?Sized> Default for MoveSet<M> {
    fn default() -> Self {
        MoveSet { moves: Vec::new() }
    }
}

impl<M: ?Sized> MoveSet<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, weight: f64, mv: impl BetweenModelMove<M> + 'static) -> Self {
        self.push(weight, Box::new(mv));
        self
    }

    pub fn push(&mut self, weight: f64, mv: Box<dyn BetweenModelMove<M>>) {
        assert!(weight > 0.0, "move weights must be positive");
        self.moves.push((weight, mv));
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn departs(&self, from: usize, space: &ModelSpace) -> bool {
        space
            .graph()
            .targets(from)
            .iter()
            .any(|&(to, q)| q > 0.0 && self.moves.iter().any(|(_, m)| m.connects(from, to)))
    }

    fn choose(&self, from: usize, to: usize, rng: &mut ChainRng) -> Option<&dyn BetweenModelMove<M>> {
        let total: f64 = self
            .moves
            .iter()
            .filter(|(_, m)| m.connects(from, to))
            .map(|(w, _)| w)
            .sum();
        if total <= 0.0 {
            return None;
        }
        let mut u = rng.random::<f64>() * total;
        let mut last = None;
        for (w, m) in self.moves.iter().filter(|(_, m)| m.connects(from, to)) {
            last = Some(m.as_ref());
            if u < *w {
                return last;
            }
            u -= w;
        }
        last
    }
}

/// One recorded between-model attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptRecord {
    pub iteration: u64,
    pub from: usize,
    pub to: usize,
    pub alpha: f64,
    pub accepted: bool,
    pub burn_in: bool,
}

/// Between-model step: draws `k′ ~ q(k → ·)`, then runs one of the moves
/// connecting `k` and `k′`. A sampled self-jump with no move defined for it
/// leaves the state untouched and records nothing.
pub fn rj_between_model_step<M: Model + ?Sized>(
    model: &M,
    space: &ModelSpace,
    moves: &MoveSet<M>,
    state: ChainState,
    rng: &mut ChainRng,
) -> Result<(ChainState, Option<(usize, usize, f64, bool)>)> {
    let from = state.model;
    let to = space.graph().sample(from, rng)?;
    let Some(mv) = moves.choose(from, to, rng) else {
        if to == from {
            return Ok((state, None));
        }
        return Err(RjError::NoMove { from, to });
    };
    let outcome = mv.attempt(model, space, &state, to, rng)?;
    let expected = model.dimension(outcome.state.model);
    if outcome.state.params.len() != expected {
        return Err(RjError::dims("between-model proposal", expected, outcome.state.params.len()));
    }
    let record = (from, to, outcome.alpha.clamp(0.0, 1.0), outcome.accepted);
    Ok((outcome.state, Some(record)))
}
