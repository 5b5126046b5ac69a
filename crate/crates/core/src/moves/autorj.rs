//! Moment-matched generic jumps.
//!
//! Each model `k` is summarised by a location `μ_k` and an invertible square
//! root `B_k` of its posterior covariance. A point is standardised in its own
//! model, rotated by `R`, padded with (or stripped of) standard normal
//! coordinates, and mapped into the other model:
//! `θ′ = μ′ + B′ R [B⁻¹(θ − μ); u]` moving up and
//! `[z; u] = Rᵀ B′⁻¹(θ′ − μ′)`, `θ = μ + B z` moving down.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, RjError};
use crate::model::{ChainState, Model};
use crate::moves::jump::{DimensionMap, JumpMove, NoAux, StdNormalAux};
use crate::rng::ChainRng;

/// Location and covariance square root of one model's posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub factor: DMatrix<f64>,
}

impl Moments {
    pub fn new(mean: Vec<f64>, factor: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if factor.nrows() != n || factor.ncols() != n {
            return Err(RjError::dims("moment factor", n, factor.nrows()));
        }
        Ok(Moments {
            mean: DVector::from_vec(mean),
            factor,
        })
    }

    /// Diagonal factor from per-coordinate standard deviations.
    pub fn diagonal(mean: Vec<f64>, sd: &[f64]) -> Result<Self> {
        let factor = DMatrix::from_diagonal(&DVector::from_row_slice(sd));
        Moments::new(mean, factor)
    }

    /// Sample mean and lower Cholesky factor of the sample covariance.
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(RjError::InsufficientData("no pilot samples".into()));
        };
        let n = first.len();
        if samples.len() <= n {
            return Err(RjError::InsufficientData(format!(
                "{} pilot samples cannot estimate a {n}-dimensional covariance",
                samples.len()
            )));
        }
        let mut mean = DVector::zeros(n);
        for s in samples {
            if s.len() != n {
                return Err(RjError::dims("pilot sample", n, s.len()));
            }
            mean += DVector::from_row_slice(s);
        }
        mean /= samples.len() as f64;
        let mut cov = DMatrix::zeros(n, n);
        for s in samples {
            let d = DVector::from_row_slice(s) - &mean;
            cov += &d * d.transpose();
        }
        cov /= (samples.len() - 1) as f64;
        let chol = nalgebra::Cholesky::new(cov)
            .ok_or_else(|| RjError::Singular("pilot covariance is not positive definite".into()))?;
        Ok(Moments {
            mean,
            factor: chol.l(),
        })
    }

    /// Runs `iterations` within-model updates of model `k` from `start` and
    /// estimates the moments from the draws.
    pub fn from_pilot<M: Model + ?Sized>(
        model: &M,
        start: ChainState,
        iterations: usize,
        scales: &[f64],
        rng: &mut ChainRng,
    ) -> Result<Self> {
        let mut state = start;
        let mut draws = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            state = model.within_model_step(state, scales, rng)?;
            draws.push(state.params.clone());
        }
        Moments::from_samples(&draws)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// The dimension-matching map between a low model and a high model
/// (`n_low ≤ n_high`).
#[derive(Debug, Clone)]
pub struct AutoRjMap {
    low: usize,
    high: usize,
    mu_low: DVector<f64>,
    b_low: DMatrix<f64>,
    b_low_inv: DMatrix<f64>,
    mu_high: DVector<f64>,
    b_high: DMatrix<f64>,
    b_high_inv: DMatrix<f64>,
    rotation: DMatrix<f64>,
    log_det: f64,
}

fn invert(b: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, f64)> {
    let det = b.determinant();
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(RjError::Singular(format!("{what} is not invertible")));
    }
    let inv = b
        .clone()
        .try_inverse()
        .ok_or_else(|| RjError::Singular(format!("{what} is not invertible")))?;
    Ok((inv, det.abs().ln()))
}

impl AutoRjMap {
    /// `rotation` must be orthogonal of order `n_high`; `None` means the
    /// identity.
    pub fn new(low: usize, low_moments: &Moments, high: usize, high_moments: &Moments, rotation: Option<DMatrix<f64>>) -> Result<Self> {
        let n = high_moments.dim();
        if low_moments.dim() > n {
            return Err(RjError::dims("auto-RJ model order", n, low_moments.dim()));
        }
        let rotation = rotation.unwrap_or_else(|| DMatrix::identity(n, n));
        if rotation.nrows() != n || rotation.ncols() != n {
            return Err(RjError::dims("rotation order", n, rotation.nrows()));
        }
        let defect = (&rotation * rotation.transpose() - DMatrix::identity(n, n)).amax();
        if defect > 1e-10 {
            return Err(RjError::InvalidConfig(format!("rotation is not orthogonal (defect {defect:e})")));
        }
        let (b_low_inv, ld_low) = invert(&low_moments.factor, "low-model factor")?;
        let (b_high_inv, ld_high) = invert(&high_moments.factor, "high-model factor")?;
        Ok(AutoRjMap {
            low,
            high,
            mu_low: low_moments.mean.clone(),
            b_low: low_moments.factor.clone(),
            b_low_inv,
            mu_high: high_moments.mean.clone(),
            b_high: high_moments.factor.clone(),
            b_high_inv,
            rotation,
            log_det: ld_high - ld_low,
        })
    }

    pub fn padding(&self) -> usize {
        self.mu_high.len() - self.mu_low.len()
    }
}

impl DimensionMap for AutoRjMap {
    fn source(&self) -> usize {
        self.low
    }
    fn target(&self) -> usize {
        self.high
    }
    fn forward(&self, theta: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.mu_low.len();
        if theta.len() != n || u.len() != self.padding() {
            return Err(RjError::dims("auto-RJ input", n + self.padding(), theta.len() + u.len()));
        }
        let z = &self.b_low_inv * (DVector::from_row_slice(theta) - &self.mu_low);
        let padded = DVector::from_iterator(n + u.len(), z.iter().copied().chain(u.iter().copied()));
        let out = &self.mu_high + &self.b_high * (&self.rotation * padded);
        Ok((out.as_slice().to_vec(), Vec::new()))
    }
    fn inverse(&self, theta: &[f64], _u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.mu_low.len();
        if theta.len() != self.mu_high.len() {
            return Err(RjError::dims("auto-RJ input", self.mu_high.len(), theta.len()));
        }
        let z = self.rotation.transpose() * (&self.b_high_inv * (DVector::from_row_slice(theta) - &self.mu_high));
        let low = &self.mu_low + &self.b_low * z.rows(0, n);
        Ok((low.as_slice().to_vec(), z.as_slice()[n..].to_vec()))
    }
    fn log_jacobian(&self, _theta: &[f64], _u: &[f64]) -> f64 {
        self.log_det
    }
}

/// Builds the jump between models `a` and `b` from their moments. The model
/// with fewer parameters is the source; for equal dimensions, the
/// smaller index.
pub fn autorj_move<M: Model + ?Sized>(
    model: &M,
    a: usize,
    moments_a: &Moments,
    b: usize,
    moments_b: &Moments,
    rotation: Option<DMatrix<f64>>,
) -> Result<JumpMove> {
    let a_first = (moments_a.dim(), a) <= (moments_b.dim(), b);
    let (low, ml, high, mh) = if a_first {
        (a, moments_a, b, moments_b)
    } else {
        (b, moments_b, a, moments_a)
    };
    for (k, m) in [(low, ml), (high, mh)] {
        if model.dimension(k) != m.dim() {
            return Err(RjError::dims(format!("moments of model {k}"), model.dimension(k), m.dim()));
        }
    }
    let map = AutoRjMap::new(low, ml, high, mh, rotation)?;
    let pad = map.padding();
    JumpMove::new(model, map, StdNormalAux(pad), NoAux)
}

/// Haar-distributed random orthogonal matrix of order `n`.
pub fn random_orthogonal(n: usize, rng: &mut ChainRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_case() {
        let m = Moments::diagonal(vec![1.0, -2.0], &[0.5, 3.0]).unwrap();
        let map = AutoRjMap::new(1, &m, 2, &m, None).unwrap();
        let (t, _) = map.forward(&[0.3, 0.7], &[]).unwrap();
        assert!((t[0] - 0.3).abs() < 1e-15 && (t[1] - 0.7).abs() < 1e-15);
        assert_eq!(map.log_jacobian(&[], &[]), 0.0);
    }

    #[test]
    fn round_trip_with_rotation() {
        let mut rng = ChainRng::seed_from_u64(11);
        let lo = Moments::new(vec![0.5], DMatrix::from_element(1, 1, 2.0)).unwrap();
        let hi = Moments::new(vec![1.0, 2.0, -1.0], DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.3, 2.0, 0.0, -0.1, 0.4, 0.7])).unwrap();
        let r = random_orthogonal(3, &mut rng);
        let map = AutoRjMap::new(1, &lo, 2, &hi, Some(r)).unwrap();
        let (t, _) = map.forward(&[0.9], &[0.1, -1.3]).unwrap();
        let (s, u) = map.inverse(&t, &[]).unwrap();
        assert!((s[0] - 0.9).abs() < 1e-12);
        assert!((u[0] - 0.1).abs() < 1e-12 && (u[1] + 1.3).abs() < 1e-12);
    }

    #[test]
    fn pilot_moments_from_samples() {
        let samples = vec![vec![1.0, 2.0], vec![3.0, 2.0], vec![2.0, 5.0], vec![2.0, -1.0]];
        let m = Moments::from_samples(&samples).unwrap();
        assert!((m.mean[0] - 2.0).abs() < 1e-15 && (m.mean[1] - 2.0).abs() < 1e-15);
        let cov = &m.factor * m.factor.transpose();
        assert!((cov[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((cov[(1, 1)] - 6.0).abs() < 1e-12);
        assert!(Moments::from_samples(&samples[..2]).is_err());
    }

    #[test]
    fn singular_factor_rejected() {
        let lo = Moments::new(vec![0.0], DMatrix::from_element(1, 1, 1.0)).unwrap();
        let hi = Moments::new(vec![0.0, 0.0], DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(AutoRjMap::new(1, &lo, 2, &hi, None), Err(RjError::Singular(_))));
    }
}
