//! Annealed between-model jumps: the dimension change is followed (moving up)
//! or preceded (moving down) by `κ` within-model updates that leave the
//! tempered density `π* = (p(θ|k) L)^γ` invariant.

use crate::error::Result;
use crate::kernel::{BetweenModelMove, MoveOutcome};
use crate::model::{ChainState, Model};
use crate::moves::jump::JumpMove;
use crate::rng::ChainRng;
use crate::sampler::WithinScales;
use crate::space::ModelSpace;

pub struct AnnealedMove {
    jump: JumpMove,
    gamma: f64,
    kappa: usize,
    scales: WithinScales,
}

impl AnnealedMove {
    pub fn new(jump: JumpMove, gamma: f64, kappa: usize, scales: WithinScales) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(crate::RjError::InvalidConfig("annealing temper must be finite and at least 1".into()));
        }
        Ok(AnnealedMove { jump, gamma, kappa, scales })
    }

    fn temper_walk<M: Model + ?Sized>(&self, model: &M, mut state: ChainState, rng: &mut ChainRng) -> Result<ChainState> {
        let scales = self.scales.for_model(state.model, model.dimension(state.model));
        for _ in 0..self.kappa {
            state = model.tempered_step(state, self.gamma, &scales, rng)?;
        }
        Ok(state)
    }
}

impl<M: Model + ?Sized> BetweenModelMove<M> for AnnealedMove {
    fn connects(&self, from: usize, to: usize) -> bool {
        <JumpMove as BetweenModelMove<M>>::connects(&self.jump, from, to)
    }

    fn attempt(&self, model: &M, space: &ModelSpace, state: &ChainState, _to: usize, rng: &mut ChainRng) -> Result<MoveOutcome> {
        let (proposed, log_ratio) = if state.model == self.jump.source() {
            let jumped = self.jump.propose(model, space, state, rng)?;
            if jumped.log_ratio == f64::NEG_INFINITY {
                return Ok(MoveOutcome::decide(state, jumped.state, f64::NEG_INFINITY, rng));
            }
            let entry = jumped.state.log_density();
            let settled = self.temper_walk(model, jumped.state, rng)?;
            let shift = (1.0 - self.gamma) * (settled.log_density() - entry);
            (settled, jumped.log_ratio + shift)
        } else {
            let settled = self.temper_walk(model, state.clone(), rng)?;
            let jumped = self.jump.propose(model, space, &settled, rng)?;
            let shift = (1.0 - self.gamma) * (settled.log_density() - state.log_density());
            (jumped.state, jumped.log_ratio + shift)
        };
        let log_ratio = if log_ratio.is_nan() { f64::NEG_INFINITY } else { log_ratio };
        Ok(MoveOutcome::decide(state, proposed, log_ratio, rng))
    }
}
