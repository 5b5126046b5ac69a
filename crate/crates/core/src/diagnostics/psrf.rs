//! Potential scale reduction factors that remain meaningful when the chain
//! moves between parameter spaces.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{CurvePoint, DiagnosticSeries, StatisticKind};
use crate::error::{Result, RjError};
use crate::rng::ChainRng;

#[derive(Default, Clone, Copy)]
struct Acc {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }
}

/// Pooled population variance split as `(within, between)` where each group
/// contributes with weight proportional to its size.
fn decompose<'a>(groups: impl Iterator<Item = &'a Acc> + Clone) -> (f64, f64) {
    let total: f64 = groups.clone().map(|g| g.n).sum();
    if total == 0.0 {
        return (0.0, 0.0);
    }
    let grand = groups.clone().map(|g| g.n * g.mean).sum::<f64>() / total;
    let within = groups.clone().map(|g| g.m2).sum::<f64>() / total;
    let between = groups.map(|g| g.n * (g.mean - grand).powi(2)).sum::<f64>() / total;
    (within, between)
}

fn ratio(num: f64, den: f64) -> f64 {
    if num <= 0.0 && den <= 0.0 {
        1.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsrfResult {
    /// Total over mean within-chain variance.
    pub v_ratio: DiagnosticSeries,
    /// Within-model over within-model-within-chain variance.
    pub w_ratio: DiagnosticSeries,
    /// Non-finite function values dropped from the computation.
    pub excluded: usize,
}

/// Variance ratios for a scalar function observed alongside the model
/// indicator. `traces[c][t] = (model, value)`.
pub fn mpsrf(traces: &[Vec<(usize, f64)>], checkpoints: &[usize]) -> Result<MpsrfResult> {
    if traces.len() < 2 {
        return Err(RjError::InsufficientData("mPSRF needs at least two chains".into()));
    }
    let mut excluded = 0;
    let mut v_points = Vec::new();
    let mut w_points = Vec::new();
    for &c in checkpoints {
        let mut chains = vec![Acc::default(); traces.len()];
        let mut cells: BTreeMap<(usize, usize), Acc> = BTreeMap::new();
        let mut bad = 0;
        for (ci, t) in traces.iter().enumerate() {
            for &(k, f) in &t[..c.min(t.len())] {
                if !f.is_finite() {
                    bad += 1;
                    continue;
                }
                chains[ci].push(f);
                cells.entry((k, ci)).or_default().push(f);
            }
        }
        excluded = bad;
        if chains.iter().any(|a| a.n < 1.0) {
            v_points.push(CurvePoint::skipped(c));
            w_points.push(CurvePoint::skipped(c));
            continue;
        }
        let (wc, bc) = decompose(chains.iter());
        // Per model: within-(model, chain) part plus the chain-to-chain part.
        let mut wmwc = 0.0;
        let mut wm_between = 0.0;
        let total: f64 = chains.iter().map(|a| a.n).sum();
        let models: Vec<usize> = {
            let mut m: Vec<usize> = cells.keys().map(|&(k, _)| k).collect();
            m.dedup();
            m
        };
        for k in models {
            let group: Vec<&Acc> = cells.range((k, 0)..=(k, usize::MAX)).map(|(_, a)| a).collect();
            let n_k: f64 = group.iter().map(|a| a.n).sum();
            let (w, b) = decompose(group.iter().copied());
            wmwc += w * n_k / total;
            wm_between += b * n_k / total;
        }
        let point = |v: f64| CurvePoint {
            checkpoint: c,
            value: Some(v),
            p_value: None,
            df: None,
        };
        v_points.push(point(ratio(wc + bc, wc)));
        w_points.push(point(ratio(wmwc + wm_between, wmwc)));
    }
    Ok(MpsrfResult {
        v_ratio: DiagnosticSeries {
            kind: StatisticKind::MpsrfV,
            label: String::new(),
            points: v_points,
        },
        w_ratio: DiagnosticSeries {
            kind: StatisticKind::MpsrfW,
            label: String::new(),
            points: w_points,
        },
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePsrfResult {
    pub reference_points: Vec<ReferencePoint>,
    /// One curve per reference point.
    pub series: Vec<DiagnosticSeries>,
    /// Largest factor over reference points at each checkpoint.
    pub max: DiagnosticSeries,
    /// States with no events, whose distance is infinite; excluded.
    pub infinite_distances: usize,
}

/// Uniform draws in the bounding box of all events.
pub fn reference_points(traces: &[Vec<Vec<Vec<f64>>>], count: usize, rng: &mut ChainRng) -> Result<Vec<ReferencePoint>> {
    let mut events = traces.iter().flatten().flatten();
    let first = events
        .next()
        .ok_or_else(|| RjError::InsufficientData("no events to place reference points".into()))?;
    let mut lo = first.clone();
    let mut hi = first.clone();
    for e in events {
        if e.len() != lo.len() {
            return Err(RjError::dims("event", lo.len(), e.len()));
        }
        for (d, &x) in e.iter().enumerate() {
            lo[d] = lo[d].min(x);
            hi[d] = hi[d].max(x);
        }
    }
    Ok((0..count)
        .map(|_| ReferencePoint {
            coords: lo
                .iter()
                .zip(&hi)
                .map(|(&a, &b)| if b > a { rng.random_range(a..b) } else { a })
                .collect(),
        })
        .collect())
}

/// Gelman–Rubin factor on the distance from each state's event set to fixed
/// reference points. Coordinates are scaled by their pooled standard
/// deviation. `traces[chain][sample]` is the list of events of a state.
pub fn distance_psrf(
    traces: &[Vec<Vec<Vec<f64>>>],
    refs: &[ReferencePoint],
    checkpoints: &[usize],
) -> Result<DistancePsrfResult> {
    if traces.len() < 2 {
        return Err(RjError::InsufficientData("distance PSRF needs at least two chains".into()));
    }
    if refs.is_empty() {
        return Err(RjError::InvalidConfig("at least one reference point is required".into()));
    }
    let dim = refs[0].coords.len();
    let mut coord = vec![Acc::default(); dim];
    for e in traces.iter().flatten().flatten() {
        if e.len() != dim {
            return Err(RjError::dims("event", dim, e.len()));
        }
        for (a, &x) in coord.iter_mut().zip(e) {
            a.push(x);
        }
    }
    let scale: Vec<f64> = coord
        .iter()
        .map(|a| {
            let sd = if a.n > 0.0 { (a.m2 / a.n).sqrt() } else { 0.0 };
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let distance = |events: &[Vec<f64>], r: &ReferencePoint| -> f64 {
        events
            .iter()
            .map(|e| {
                e.iter()
                    .zip(&r.coords)
                    .zip(&scale)
                    .map(|((&x, &c), &s)| ((x - c) / s).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let infinite = traces.iter().flatten().filter(|s| s.is_empty()).count();
    let mut series = Vec::with_capacity(refs.len());
    let mut max_points: Vec<CurvePoint> = checkpoints
        .iter()
        .map(|&c| CurvePoint {
            checkpoint: c,
            value: Some(f64::NEG_INFINITY),
            p_value: None,
            df: None,
        })
        .collect();
    for (ri, r) in refs.iter().enumerate() {
        let dists: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.iter().map(|s| distance(s, r)).collect())
            .collect();
        let mut points = Vec::with_capacity(checkpoints.len());
        for (pi, &c) in checkpoints.iter().enumerate() {
            let mut chains = vec![Acc::default(); traces.len()];
            for (a, d) in chains.iter_mut().zip(&dists) {
                for &x in d[..c.min(d.len())].iter().filter(|x| x.is_finite()) {
                    a.push(x);
                }
            }
            if chains.iter().any(|a| a.n < 1.0) {
                points.push(CurvePoint::skipped(c));
                max_points[pi].value = None;
                continue;
            }
            let (w, b) = decompose(chains.iter());
            let v = ratio(w + b, w).sqrt();
            if let Some(m) = max_points[pi].value.as_mut() {
                *m = m.max(v);
            }
            points.push(CurvePoint {
                checkpoint: c,
                value: Some(v),
                p_value: None,
                df: None,
            });
        }
        series.push(DiagnosticSeries {
            kind: StatisticKind::DistancePsrf,
            label: ri.to_string(),
            points,
        });
    }
    Ok(DistancePsrfResult {
        reference_points: refs.to_vec(),
        series,
        max: DiagnosticSeries {
            kind: StatisticKind::DistancePsrf,
            label: "max".into(),
            points: max_points,
        },
        infinite_distances: infinite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identical_chains_give_one() {
        let t: Vec<(usize, f64)> = (0..50).map(|i| (1 + i % 3, (i as f64 * 0.37).sin())).collect();
        let r = mpsrf(&[t.clone(), t.clone(), t], &[50]).unwrap();
        assert_eq!(r.v_ratio.last_value().unwrap(), 1.0);
        assert_eq!(r.w_ratio.last_value().unwrap(), 1.0);
    }

    #[test]
    fn shifted_chain_inflates() {
        let a: Vec<(usize, f64)> = (0..100).map(|i| (1, (i as f64).sin())).collect();
        let b: Vec<(usize, f64)> = a.iter().map(|&(k, f)| (k, f + 3.0)).collect();
        let r = mpsrf(&[a, b], &[100]).unwrap();
        assert!(r.v_ratio.last_value().unwrap() > 2.0);
        assert!(r.w_ratio.last_value().unwrap() > 2.0);
    }

    #[test]
    fn non_finite_values_are_counted() {
        let a = vec![(1, 1.0), (1, f64::NAN), (2, 0.5)];
        let b = vec![(1, 0.9), (2, 0.4), (2, f64::INFINITY)];
        assert_eq!(mpsrf(&[a, b], &[3]).unwrap().excluded, 2);
    }

    #[test]
    fn distance_psrf_identical_chains() {
        let chain: Vec<Vec<Vec<f64>>> = (0..40)
            .map(|i| (0..=(i % 3)).map(|j| vec![i as f64 * 0.1 + j as f64, 0.5]).collect())
            .collect();
        let mut rng = ChainRng::seed_from_u64(3);
        let traces = vec![chain.clone(), chain];
        let refs = reference_points(&traces, 10, &mut rng).unwrap();
        let r = distance_psrf(&traces, &refs, &[20, 40]).unwrap();
        for s in &r.series {
            assert_eq!(s.last_value().unwrap(), 1.0);
        }
        assert_eq!(r.max.last_value().unwrap(), 1.0);
    }

    #[test]
    fn empty_states_are_flagged() {
        let a = vec![vec![], vec![vec![1.0]], vec![vec![2.0]]];
        let b = vec![vec![vec![1.5]], vec![vec![0.5]], vec![]];
        let refs = vec![ReferencePoint { coords: vec![1.0] }];
        assert_eq!(distance_psrf(&[a, b], &refs, &[3]).unwrap().infinite_distances, 2);
    }
}
