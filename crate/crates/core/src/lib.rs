//! Reversible jump Markov chain Monte Carlo.
//!
//! A [`Model`] describes a family of candidate models `ℳ_k` with dimension
//! `n_k`, prior and likelihood. A [`ModelSpace`] adds the model prior `p(k)` and
//! the jump graph `q(k → k′)`. Between-model moves live in [`moves`], ready-made
//! model families in [`models`], and post-processing in [`diagnostics`] and
//! [`estimation`].

pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod kernel;
pub mod model;
pub mod models;
pub mod moves;
pub mod rng;
pub mod sampler;
pub mod space;
pub mod stats;

pub use error::{Result, RjError};
pub use kernel::{AttemptRecord, BetweenModelMove, MoveOutcome, MoveSet};
pub use model::{ChainState, Model};
pub use rng::{replicate_rng, ChainRng};
pub use sampler::{run_sampler, ReplicateTrace, SamplerConfig, Trace, TraceSample, WithinScales};
pub use space::{JumpGraph, ModelSpace};
