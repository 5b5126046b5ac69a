//! χ² test of independence between chain and model indicator.

use crate::diagnostics::{thinned, CurvePoint, DiagnosticSeries, StatisticKind};
use crate::error::{Result, RjError};
use crate::stats::chi_square_sf;

/// Minimum expected cell count after pooling adjacent models.
pub const MIN_EXPECTED: f64 = 5.0;

/// Contingency statistic, degrees of freedom and p-value for the table
/// `counts[chain][model]`, pooling adjacent model columns until every
/// expected count reaches [`MIN_EXPECTED`].
pub fn contingency_test(counts: &[Vec<f64>]) -> (f64, f64, f64) {
    let rows: Vec<f64> = counts.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = rows.iter().sum();
    let ncols = counts.first().map_or(0, |r| r.len());
    let col_total = |c: &[usize]| -> f64 { counts.iter().map(|r| c.iter().map(|&j| r[j]).sum::<f64>()).sum() };
    let min_row = rows.iter().copied().fold(f64::INFINITY, f64::min);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    for j in 0..ncols {
        current.push(j);
        if min_row * col_total(&current) / total >= MIN_EXPECTED {
            groups.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        match groups.last_mut() {
            Some(g) => g.extend(current),
            None => groups.push(current),
        }
    }
    groups.retain(|g| col_total(g) > 0.0);
    if groups.len() < 2 || total <= 0.0 {
        return (0.0, 0.0, 1.0);
    }
    let mut stat = 0.0;
    for (i, r) in counts.iter().enumerate() {
        for g in &groups {
            let observed: f64 = g.iter().map(|&j| r[j]).sum();
            let expected = rows[i] * col_total(g) / total;
            if expected > 0.0 {
                stat += (observed - expected).powi(2) / expected;
            }
        }
    }
    let df = ((counts.len() - 1) * (groups.len() - 1)) as f64;
    (stat, df, chi_square_sf(stat, df))
}

/// Pearson goodness-of-fit of `observed` counts against cell probabilities
/// `probs`. Cells with expected count below [`MIN_EXPECTED`] are pooled into
/// one. Returns `(statistic, df, p-value)`.
pub fn goodness_of_fit(observed: &[f64], probs: &[f64]) -> Result<(f64, f64, f64)> {
    if observed.len() != probs.len() {
        return Err(RjError::dims("goodness-of-fit cells", probs.len(), observed.len()));
    }
    let n: f64 = observed.iter().sum();
    let total_p: f64 = probs.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = n * p / total_p;
        if e < MIN_EXPECTED {
            pooled_o += o;
            pooled_e += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e > 0.0 {
        stat += (pooled_o - pooled_e).powi(2) / pooled_e;
        cells += 1;
    } else if pooled_o > 0.0 {
        return Ok((f64::INFINITY, cells as f64, 0.0));
    }
    if cells < 2 {
        return Ok((0.0, 0.0, 1.0));
    }
    let df = (cells - 1) as f64;
    Ok((stat, df, chi_square_sf(stat, df)))
}

/// χ² curve over all chains simultaneously on lag-thinned prefixes.
pub fn model_indicator_chisq(traces: &[Vec<usize>], lag: usize, checkpoints: &[usize]) -> Result<DiagnosticSeries> {
    if traces.len() < 2 {
        return Err(RjError::InsufficientData("the chi-square test needs at least two chains".into()));
    }
    if lag == 0 {
        return Err(RjError::InvalidConfig("lag must be at least 1".into()));
    }
    let lo = traces.iter().flatten().copied().min().unwrap_or(0);
    let hi = traces.iter().flatten().copied().max().unwrap_or(0);
    let points = checkpoints
        .iter()
        .map(|&c| {
            let mut counts = vec![vec![0.0; hi - lo + 1]; traces.len()];
            for (row, t) in counts.iter_mut().zip(traces) {
                for k in thinned(t, c, lag) {
                    row[k - lo] += 1.0;
                }
            }
            if counts.iter().any(|r| r.iter().sum::<f64>() < 1.0) {
                return CurvePoint::skipped(c);
            }
            let (stat, df, p) = contingency_test(&counts);
            CurvePoint {
                checkpoint: c,
                value: Some(stat),
                p_value: Some(p),
                df: Some(df),
            }
        })
        .collect();
    Ok(DiagnosticSeries {
        kind: StatisticKind::ChiSquare,
        label: String::new(),
        points,
    })
}
