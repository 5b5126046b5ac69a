//! Two-sample Kolmogorov–Smirnov comparison of model-indicator sequences.
//!
//! The indicator is discrete, so the classical Kolmogorov limit is
//! conservative. The p-value here is the asymptotic one for discrete data:
//! under the null, `√(nm/(n+m)) D` behaves like the supremum of `|B(F(t))|`
//! over the atoms of the pooled distribution, where `B` is a Brownian bridge.
//! That probability is computed by a forward recursion over the atoms on a
//! grid. With more than [`MAX_EXACT_ATOMS`] atoms the Kolmogorov series is
//! used instead.

use crate::diagnostics::{thinned, CurvePoint, DiagnosticSeries, StatisticKind};
use crate::error::{Result, RjError};
use crate::stats::normal_cdf;

pub const MAX_EXACT_ATOMS: usize = 50;
const GRID: usize = 400;

fn sorted(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v
}

/// `sup_t |F̂_a(t) − F̂_b(t)|`.
pub fn ks_statistic(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Kolmogorov series `P(K > x) = 2 Σ (−1)^{j−1} exp(−2j²x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * x * x).exp();
        s += if j as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `P(max_i |B(cᵢ)| ≥ x)` for a Brownian bridge `B` observed at the
/// increasing times `cᵢ ∈ (0, 1)`.
pub fn bridge_exceedance(times: &[f64], x: f64) -> f64 {
    if x <= 0.0 || times.is_empty() {
        return if x <= 0.0 { 1.0 } else { 0.0 };
    }
    if times.len() == 1 {
        let sd = (times[0] * (1.0 - times[0])).sqrt();
        return (2.0 * normal_cdf(-x / sd)).min(1.0);
    }
    let h = 2.0 * x / GRID as f64;
    let edge = |j: usize| -x + j as f64 * h;
    let mid = |j: usize| -x + (j as f64 + 0.5) * h;
    let sd0 = (times[0] * (1.0 - times[0])).sqrt();
    let mut mass: Vec<f64> = (0..GRID)
        .map(|j| normal_cdf(edge(j + 1) / sd0) - normal_cdf(edge(j) / sd0))
        .collect();
    for w in times.windows(2) {
        let (s, t) = (w[0], w[1]);
        let shrink = (1.0 - t) / (1.0 - s);
        let sd = ((t - s) * shrink).sqrt();
        let mut next = vec![0.0; GRID];
        for (i, &p) in mass.iter().enumerate() {
            if p < 1e-300 {
                continue;
            }
            let centre = mid(i) * shrink;
            let mut lower = normal_cdf((edge(0) - centre) / sd);
            for (j, slot) in next.iter_mut().enumerate() {
                let upper = normal_cdf((edge(j + 1) - centre) / sd);
                *slot += p * (upper - lower);
                lower = upper;
            }
        }
        mass = next;
    }
    (1.0 - mass.iter().sum::<f64>()).clamp(0.0, 1.0)
}

/// Asymptotic two-sample p-value of the statistic `d` for discrete samples.
pub fn ks_p_value(a: &[usize], b: &[usize], d: f64) -> f64 {
    if !(d > 0.0) {
        return 1.0;
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    let x = d * (n * m / (n + m)).sqrt();
    let pooled = sorted(&[a, b].concat());
    let total = pooled.len() as f64;
    let mut times = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let v = pooled[i];
        while i < pooled.len() && pooled[i] == v {
            i += 1;
        }
        if i < pooled.len() {
            times.push(i as f64 / total);
        }
    }
    if times.len() > MAX_EXACT_ATOMS {
        kolmogorov_sf(x)
    } else {
        bridge_exceedance(&times, x)
    }
}

/// Pairwise KS curves for every pair of chains, on lag-thinned prefixes of
/// the model-indicator sequences.
pub fn model_indicator_ks(traces: &[Vec<usize>], lag: usize, checkpoints: &[usize]) -> Result<Vec<DiagnosticSeries>> {
    if traces.len() < 2 {
        return Err(RjError::InsufficientData("the KS comparison needs at least two chains".into()));
    }
    if lag == 0 {
        return Err(RjError::InvalidConfig("lag must be at least 1".into()));
    }
    let mut out = Vec::new();
    for a in 0..traces.len() {
        for b in a + 1..traces.len() {
            let points = checkpoints
                .iter()
                .map(|&c| {
                    let x = thinned(&traces[a], c, lag);
                    let y = thinned(&traces[b], c, lag);
                    if x.len() < 2 || y.len() < 2 {
                        return CurvePoint::skipped(c);
                    }
                    let d = ks_statistic(&x, &y);
                    CurvePoint {
                        checkpoint: c,
                        value: Some(d),
                        p_value: Some(ks_p_value(&x, &y, d)),
                        df: None,
                    }
                })
                .collect();
            out.push(DiagnosticSeries {
                kind: StatisticKind::Ks,
                label: format!("{a}-{b}"),
                points,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let a = vec![1, 2, 2, 3, 1];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_p_value(&a, &a, 0.0), 1.0);
        assert_eq!(ks_statistic(&[1, 1, 1], &[2, 2]), 1.0);
    }

    #[test]
    fn symmetric() {
        let a = vec![1, 2, 2, 3, 4, 4, 4];
        let b = vec![2, 3, 3, 3, 1];
        assert_eq!(ks_statistic(&a, &b), ks_statistic(&b, &a));
    }

    #[test]
    fn kolmogorov_series_values() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 5e-4);
        assert!((kolmogorov_sf(1.0) - 0.27).abs() < 1e-3);
    }

    #[test]
    fn bridge_single_atom_is_two_sided_normal() {
        let p = bridge_exceedance(&[0.5], 0.5 * 1.959_963_984_540_054);
        assert!((p - 0.05).abs() < 1e-9);
    }

    #[test]
    fn bridge_many_atoms_approaches_kolmogorov() {
        let times: Vec<f64> = (1..50).map(|i| i as f64 / 50.0).collect();
        // Discrete monitoring shifts the barrier by 0.5826·√Δt.
        let shift = 0.5826 / 50f64.sqrt();
        for x in [0.8, 1.0, 1.2, 1.5] {
            let p = bridge_exceedance(&times, x);
            assert!(p < kolmogorov_sf(x));
            assert!((p - kolmogorov_sf(x + shift)).abs() < 0.01, "{x}: {p}");
        }
    }

    #[test]
    fn bridge_two_atoms_against_monte_carlo_oracle() {
        use rand::{Rng, SeedableRng};
        use rand_distr::StandardNormal;
        let mut rng = crate::rng::ChainRng::seed_from_u64(9);
        let (s, t, x): (f64, f64, f64) = (0.3, 0.7, 0.55);
        let reps = 400_000;
        let mut hits = 0;
        for _ in 0..reps {
            let w1: f64 = s.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let w2 = w1 + (t - s).sqrt() * rng.sample::<f64, _>(StandardNormal);
            let w3 = w2 + (1.0 - t).sqrt() * rng.sample::<f64, _>(StandardNormal);
            let (b1, b2) = (w1 - s * w3, w2 - t * w3);
            if b1.abs() >= x || b2.abs() >= x {
                hits += 1;
            }
        }
        let mc = hits as f64 / reps as f64;
        let se = (mc * (1.0 - mc) / reps as f64).sqrt();
        assert!((bridge_exceedance(&[s, t], x) - mc).abs() < 4.0 * se + 1e-3);
    }
}
