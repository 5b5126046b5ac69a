//! Two-stage delayed-rejection jumps.
//!
//! Stage 1 is a [`JumpMove`] whose reverse (down) direction is deterministic.
//! When stage 1 is rejected, a second proposal `z = g⁽²⁾(x, u₁, u₂)` is tried.
//! It may depend on the rejected first-stage draw `u₁`. Moving down, the
//! second stage draws a fresh `ũ₁ ~ q₁` to invert `g⁽²⁾`, which makes the
//! `q₁` terms cancel from the second-stage ratio.
//!
//! The recorded acceptance probability of an attempt is the first-stage `α₁`.

use crate::error::{Result, RjError};
use crate::kernel::{acceptance_log_ratio, acceptance_probability, accept, BetweenModelMove, MoveOutcome};
use crate::model::{ChainState, Model};
use crate::moves::jump::{AuxDensity, JumpMove};
use crate::rng::ChainRng;
use crate::space::ModelSpace;

/// Second-stage map from the low model to the high model, parameterised by
/// the first-stage auxiliary draw.
pub trait StageTwoMap: Send + Sync {
    fn forward(&self, theta: &[f64], u1: &[f64], u2: &[f64]) -> Result<Vec<f64>>;
    /// Recovers `(θ, u₂)` from the high-model point for a given `u₁`.
    fn inverse(&self, theta: &[f64], u1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    /// `log |∂z / ∂(θ, u₂)|` at fixed `u₁`.
    fn log_jacobian(&self, theta: &[f64], u1: &[f64], u2: &[f64]) -> f64;
}

pub struct DelayedRejectionMove {
    stage1: JumpMove,
    stage2: Box<dyn StageTwoMap>,
    stage2_aux: Box<dyn AuxDensity>,
}

/// `log(1 − exp(l))`, with `l` capped at 0.
pub fn log_one_minus_exp(l: f64) -> f64 {
    if l >= 0.0 {
        f64::NEG_INFINITY
    } else if l > -std::f64::consts::LN_2 {
        (-l.exp_m1()).ln()
    } else {
        (-l.exp()).ln_1p()
    }
}

/// Outcome of one delayed-rejection attempt with its stage details.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedOutcome {
    pub outcome: MoveOutcome,
    pub alpha1: f64,
    /// `None` when stage 2 was not reached.
    pub alpha2: Option<f64>,
}

impl DelayedRejectionMove {
    pub fn new<M: Model + ?Sized>(
        model: &M,
        stage1: JumpMove,
        stage2: impl StageTwoMap + 'static,
        stage2_aux: impl AuxDensity + 'static,
    ) -> Result<Self> {
        if stage1.reverse_aux().dim() != 0 {
            return Err(RjError::InvalidConfig(
                "delayed rejection needs a deterministic reverse first stage".into(),
            ));
        }
        let lo = model.dimension(stage1.source()) + stage2_aux.dim();
        let hi = model.dimension(stage1.target());
        if lo != hi {
            return Err(RjError::dims("second-stage dimension matching", hi, lo));
        }
        Ok(DelayedRejectionMove {
            stage1,
            stage2: Box::new(stage2),
            stage2_aux: Box::new(stage2_aux),
        })
    }

    pub fn stage1(&self) -> &JumpMove {
        &self.stage1
    }

    /// Second-stage proposal and its log acceptance ratio.
    fn second_stage<M: Model + ?Sized>(
        &self,
        model: &M,
        space: &ModelSpace,
        x: &ChainState,
        u1: Option<&[f64]>,
        log_a1: f64,
        rng: &mut ChainRng,
    ) -> Result<Option<(ChainState, f64)>> {
        let log_reject_forward = log_one_minus_exp(log_a1);
        match u1 {
            Some(u1) => {
                let u2 = self.stage2_aux.sample(rng);
                let theta = self.stage2.forward(&x.params, u1, &u2)?;
                let z = ChainState::evaluate(model, self.stage1.target(), theta, x.latent.clone())?;
                if !z.is_finite() {
                    return Ok(None);
                }
                let back = self.stage1.propose_with(model, space, &z, &[])?;
                let log_a2 = acceptance_log_ratio(
                    space,
                    x,
                    &z,
                    self.stage2_aux.log_density(&u2) + log_reject_forward,
                    log_one_minus_exp(back.log_ratio),
                    self.stage2.log_jacobian(&x.params, u1, &u2),
                );
                Ok(Some((z, log_a2)))
            }
            None => {
                let u1 = self.stage1.forward_aux().sample(rng);
                let (theta, u2) = self.stage2.inverse(&x.params, &u1)?;
                let z = ChainState::evaluate(model, self.stage1.source(), theta, x.latent.clone())?;
                if !z.is_finite() {
                    return Ok(None);
                }
                let back = self.stage1.propose_with(model, space, &z, &u1)?;
                let log_a2 = acceptance_log_ratio(
                    space,
                    x,
                    &z,
                    log_reject_forward,
                    self.stage2_aux.log_density(&u2) + log_one_minus_exp(back.log_ratio),
                    -self.stage2.log_jacobian(&z.params, &u1, &u2),
                );
                Ok(Some((z, log_a2)))
            }
        }
    }

    /// Runs one two-stage attempt from `state`.
    pub fn step<M: Model + ?Sized>(
        &self,
        model: &M,
        space: &ModelSpace,
        state: &ChainState,
        rng: &mut ChainRng,
    ) -> Result<DelayedOutcome> {
        let up = state.model == self.stage1.source();
        let u1 = self.stage1.aux_for(state.model).sample(rng);
        let first = self.stage1.propose_with(model, space, state, &u1)?;
        let alpha1 = acceptance_probability(first.log_ratio);
        if accept(alpha1, rng) {
            return Ok(DelayedOutcome {
                outcome: MoveOutcome {
                    state: first.state,
                    alpha: alpha1,
                    accepted: true,
                },
                alpha1,
                alpha2: None,
            });
        }
        let second = self.second_stage(model, space, state, up.then_some(u1.as_slice()), first.log_ratio, rng)?;
        let Some((z, log_a2)) = second else {
            return Ok(DelayedOutcome {
                outcome: MoveOutcome {
                    state: state.clone(),
                    alpha: alpha1,
                    accepted: false,
                },
                alpha1,
                alpha2: Some(0.0),
            });
        };
        let alpha2 = acceptance_probability(log_a2);
        let accepted = accept(alpha2, rng);
        Ok(DelayedOutcome {
            outcome: MoveOutcome {
                state: if accepted { z } else { state.clone() },
                alpha: alpha1,
                accepted,
            },
            alpha1,
            alpha2: Some(alpha2),
        })
    }
}

impl<M: Model + ?Sized> BetweenModelMove<M> for DelayedRejectionMove {
    fn connects(&self, from: usize, to: usize) -> bool {
        <JumpMove as BetweenModelMove<M>>::connects(&self.stage1, from, to)
    }

    fn attempt(&self, model: &M, space: &ModelSpace, state: &ChainState, _to: usize, rng: &mut ChainRng) -> Result<MoveOutcome> {
        Ok(self.step(model, space, state, rng)?.outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_one_minus_exp_values() {
        assert_eq!(log_one_minus_exp(0.0), f64::NEG_INFINITY);
        assert_eq!(log_one_minus_exp(3.0), f64::NEG_INFINITY);
        for l in [-1e-8, -0.1, -0.69, -0.7, -5.0, -40.0] {
            let direct = (1.0 - f64::exp(l)).ln();
            assert!((log_one_minus_exp(l) - direct).abs() < 1e-7 * direct.abs().max(1e-9));
        }
    }
}
