//! Calibration of between-model proposal parameters at a centering point,
//! where the current and the proposed states have equal likelihoods.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RjError};
use crate::model::ChainState;
use crate::models::ar::{ar_birth_move, ArModel};
use crate::space::ModelSpace;
use crate::stats::ln_beta;

#[derive(Debug, Clone, PartialEq)]
pub struct CenteringSolution {
    /// Named proposal parameters.
    pub params: Vec<(String, f64)>,
    /// Auxiliary value at which the likelihoods agree.
    pub centering_point: Vec<f64>,
    /// Residuals of the defining equations at the solution.
    pub residuals: Vec<f64>,
}

impl CenteringSolution {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Solves `log A(σ) = 0` for a positive scale `σ`, searching outward from
/// `initial` on a log scale and then bisecting.
pub fn zeroth_order_scale<F>(log_acceptance: F, initial: f64, centering_point: Vec<f64>) -> Result<CenteringSolution>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(initial > 0.0) || !initial.is_finite() {
        return Err(RjError::Calibration("initial scale must be positive".into()));
    }
    let f = |log_s: f64| log_acceptance(log_s.exp());
    let (mut lo, mut hi) = (initial.ln() - 1.0, initial.ln() + 1.0);
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    let mut expansions = 0;
    while !(flo.is_finite() && fhi.is_finite() && flo.signum() != fhi.signum()) {
        expansions += 1;
        if expansions > 200 {
            return Err(RjError::Calibration(format!(
                "no positive root of A(sigma) = 1 in [{:e}, {:e}]",
                lo.exp(),
                hi.exp()
            )));
        }
        lo -= 1.0;
        hi += 1.0;
        flo = f(lo)?;
        fhi = f(hi)?;
    }
    if flo == 0.0 {
        hi = lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let log_s = 0.5 * (lo + hi);
    let residual = f(log_s)?;
    Ok(CenteringSolution {
        params: vec![("sigma".into(), log_s.exp())],
        centering_point,
        residuals: vec![residual],
    })
}

/// Closed-form zeroth-order scale of the AR birth move,
/// `σ = σ_a q(k→k+1) / q(k+1→k)`.
pub fn ar_birth_closed_form(sigma_a: f64, q_up: f64, q_down: f64) -> f64 {
    sigma_a * q_up / q_down
}

/// Log acceptance ratio of the AR birth `a_{k+1} = σu` from `state` at
/// auxiliary value `u`.
pub fn ar_birth_log_acceptance(model: &ArModel, space: &ModelSpace, state: &ChainState, sigma: f64, u: f64) -> Result<f64> {
    let mv = ar_birth_move(model, state.model, sigma)?;
    Ok(mv.propose_with(model, space, state, &[u])?.log_ratio)
}

/// Zeroth-order scale of the AR birth from `state`, by root-finding on the
/// full acceptance ratio at the centering point `u = 0`.
pub fn ar_birth_scale(model: &ArModel, space: &ModelSpace, state: &ChainState) -> Result<CenteringSolution> {
    zeroth_order_scale(
        |s| ar_birth_log_acceptance(model, space, state, s, 0.0),
        model.hyper().sigma_a,
        vec![0.0],
    )
}

fn binomial(n: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Central finite-difference estimate of the `n`-th derivative of `f` at `x`.
pub fn central_derivative<F: Fn(f64) -> f64>(f: F, x: f64, order: usize, h: f64) -> f64 {
    let half = order as f64 / 2.0;
    let sum: f64 = (0..=order)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(order, i) * f(x + (half - i as f64) * h)
        })
        .sum();
    sum / h.powi(order as i32)
}

/// Finite-difference steps used for derivatives of order 1, 2, ….
pub fn derivative_step(order: usize) -> f64 {
    match order {
        1 => 1e-5,
        2 => 1e-3,
        _ => 1e-2,
    }
}

/// `m`-th order calibration: finds `m` proposal parameters making the first
/// `m` derivatives of `log_alpha(u, params)` in `u` vanish at `point`, by
/// Newton iteration on finite-difference derivatives.
pub fn nth_order_params<F>(log_alpha: F, point: f64, names: &[&str], initial: Vec<f64>) -> Result<CenteringSolution>
where
    F: Fn(f64, &[f64]) -> f64,
{
    let m = initial.len();
    if m == 0 || names.len() != m {
        return Err(RjError::Calibration("one name per proposal parameter".into()));
    }
    let residuals = |p: &[f64]| -> Vec<f64> {
        (1..=m)
            .map(|n| central_derivative(|u| log_alpha(u, p), point, n, derivative_step(n)))
            .collect()
    };
    let mut p = initial;
    let mut r = residuals(&p);
    for _ in 0..50 {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            break;
        }
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let step = 1e-4 * p[j].abs().max(1.0);
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus[j] += step;
            minus[j] -= step;
            let (rp, rm) = (residuals(&plus), residuals(&minus));
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        let delta = jac
            .lu()
            .solve(&DVector::from_vec(r.clone()))
            .ok_or_else(|| RjError::Calibration(format!("singular derivative system, residuals {r:?}")))?;
        for j in 0..m {
            p[j] -= delta[j];
        }
        r = residuals(&p);
    }
    if r.iter().any(|x| !x.is_finite()) || r.iter().map(|x| x * x).sum::<f64>().sqrt() > 1e-6 {
        return Err(RjError::Calibration(format!("derivative conditions not met, residuals {r:?}")));
    }
    Ok(CenteringSolution {
        params: names.iter().map(|n| n.to_string()).zip(p).collect(),
        centering_point: vec![point],
        residuals: r,
    })
}

/// The `u₁`-dependent part of the split-move log acceptance at the centering
/// point: weight terms `(δ − 1 + 2lᵢ) log wᵢ` of the two new components with
/// `w₁ = w*u₁`, `w₂ = w*(1 − u₁)`, minus the `Beta(p₁, q₁)` log density.
pub fn split_weight_log_acceptance(u1: f64, w_star: f64, delta: f64, l1: f64, l2: f64, p1: f64, q1: f64) -> f64 {
    (delta - 1.0 + 2.0 * l1) * (w_star * u1).ln() + (delta - 1.0 + 2.0 * l2) * (w_star * (1.0 - u1)).ln()
        - ((p1 - 1.0) * u1.ln() + (q1 - 1.0) * (1.0 - u1).ln() - ln_beta(p1, q1))
}

/// Point near the centering value `u₁ = 1` at which the derivative
/// conditions for the split weight are imposed.
pub const SPLIT_WEIGHT_POINT: f64 = 0.99;

/// Second-order `Beta(p₁, q₁)` parameters of the split weight when all `l*`
/// observations of the parent go to the first new component.
pub fn split_weight_second_order(delta: f64, l_star: usize, w_star: f64) -> Result<CenteringSolution> {
    let l = l_star as f64;
    let mut sol = nth_order_params(
        |u, p| split_weight_log_acceptance(u, w_star, delta, l, 0.0, p[0], p[1]),
        SPLIT_WEIGHT_POINT,
        &["p1", "q1"],
        vec![1.0, 1.0],
    )?;
    sol.centering_point = vec![1.0];
    Ok(sol)
}
