//! Convergence assessment for variable-dimension traces and label-switching
//! post-processing.

pub mod chisq;
pub mod ks;
pub mod psrf;
pub mod relabel;

use serde::{Deserialize, Serialize};

pub use chisq::{goodness_of_fit, model_indicator_chisq};
pub use ks::model_indicator_ks;
pub use psrf::{distance_psrf, mpsrf, ReferencePoint};
pub use relabel::{relabel_by_constraint, relabel_trace};

use crate::model::{ChainState, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Ks,
    ChiSquare,
    MpsrfV,
    MpsrfW,
    DistancePsrf,
}

/// One statistic evaluated on the first `checkpoint` samples of every chain.
/// `value` is `None` when the checkpoint was skipped for lack of data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub checkpoint: usize,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub df: Option<f64>,
}

impl CurvePoint {
    pub fn skipped(checkpoint: usize) -> Self {
        CurvePoint {
            checkpoint,
            value: None,
            p_value: None,
            df: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub kind: StatisticKind,
    /// Chain pair (`"0-1"`), reference point index, or empty.
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl DiagnosticSeries {
    pub fn last_value(&self) -> Option<f64> {
        self.points.iter().rev().find_map(|p| p.value)
    }

    pub fn last_p_value(&self) -> Option<f64> {
        self.points.iter().rev().find_map(|p| p.p_value)
    }
}

/// `count` evenly spaced cumulative checkpoints up to `len` samples.
pub fn default_checkpoints(len: usize, count: usize) -> Vec<usize> {
    let count = count.max(1);
    let mut out: Vec<usize> = (1..=count).map(|i| len * i / count).filter(|&c| c > 0).collect();
    out.dedup();
    out
}

/// `−2 log L` of a state, without saturated-model constants.
pub fn deviance<M: Model + ?Sized>(model: &M, state: &ChainState) -> f64 {
    model.deviance(state)
}

/// Every `lag`-th element of the first `n` entries, starting with the first.
pub(crate) fn thinned<T: Copy>(values: &[T], n: usize, lag: usize) -> Vec<T> {
    values[..n.min(values.len())].iter().step_by(lag.max(1)).copied().collect()
}
