//! Small numerical helpers shared by the models, moves and diagnostics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

pub use statrs::function::beta::ln_beta;
pub use statrs::function::gamma::ln_gamma;

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn normal_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    if !(variance > 0.0) {
        return f64::NEG_INFINITY;
    }
    let d = x - mean;
    -0.5 * (LN_2PI + variance.ln() + d * d / variance)
}

pub fn std_normal_log_pdf(x: f64) -> f64 {
    -0.5 * (LN_2PI + x * x)
}

/// Beta(a, b) log density; −∞ outside the open unit interval.
pub fn beta_log_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)
}

/// Gamma log density with shape/rate parameterisation.
pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Inverse-gamma log density with shape/scale parameterisation, i.e. the law
/// of `1/y` when `y ~ Gamma(shape, rate = scale)`.
pub fn inv_gamma_log_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail of the χ² distribution. Zero degrees of freedom gives 1.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Variance with divisor `n`.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Means of `batches` contiguous, equally sized batches; a remainder at the
/// end of the series is dropped. Fewer batches are used for short series.
pub fn batch_means(values: &[f64], batches: usize) -> Vec<f64> {
    let batches = batches.min(values.len()).max(1);
    let size = values.len() / batches;
    if size == 0 {
        return Vec::new();
    }
    (0..batches)
        .map(|b| mean(&values[b * size..(b + 1) * size]))
        .collect()
}

/// Batch-means standard error of the mean of `values`.
pub fn batch_means_se(values: &[f64], batches: usize) -> f64 {
    let bm = batch_means(values, batches);
    if bm.len() < 2 {
        return f64::NAN;
    }
    let m = mean(&bm);
    let var = bm.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (bm.len() - 1) as f64;
    (var / bm.len() as f64).sqrt()
}
