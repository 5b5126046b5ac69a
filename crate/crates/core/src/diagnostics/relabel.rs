//! Identifiability constraint for mixture output.

use crate::models::mixture::{pack, sort_components, unpack};
use crate::sampler::TraceSample;

/// Orders components by mean, breaking ties by weight and then variance,
/// and relabels allocations consistently.
pub fn relabel_by_constraint(params: &[f64], allocations: &[u32]) -> (Vec<f64>, Vec<u32>) {
    let (sorted, z) = sort_components(&unpack(params), allocations);
    (pack(&sorted), z)
}

/// Applies [`relabel_by_constraint`] to every recorded sample.
pub fn relabel_trace(samples: &[TraceSample]) -> Vec<TraceSample> {
    samples
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if !s.params.is_empty() {
                s.params = relabel_by_constraint(&s.params, &[]).0;
            }
            s
        })
        .collect()
}
