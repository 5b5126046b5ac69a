use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use revjump::diagnostics::goodness_of_fit;
use revjump::models::ar::{ar_log_likelihood, ar_log_posterior, simulate_ar};
use revjump::models::changepoint::{changepoint_log_likelihood, changepoint_log_posterior, simulate_changepoint};
use revjump::models::mixture::{
    allocated_log_likelihood, gibbs_allocations, marginal_log_likelihood, mixture_log_posterior, pack, Component,
};
use revjump::models::{ArHyper, ChangePointHyper, ChangePointModel, MixtureHyper, MixtureModel};
use revjump::moves::mixture::{BirthDeathMove, SplitMergeMove};
use revjump::{ChainRng, ChainState, MoveSet, SamplerConfig};

fn random_mixture(k: usize, rng: &mut ChainRng) -> Vec<Component> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|w| Component::new(w / total, rng.random_range(-3.0..3.0), rng.random_range(0.2..2.0)))
        .collect()
}

#[test]
fn single_standard_component_at_its_mean() {
    let p = pack(&[Component::new(1.0, 0.0, 1.0)]);
    assert!((marginal_log_likelihood(&p, &[0.0]) + 0.918_938_533_204_672_7).abs() < 1e-12);
}

#[test]
fn identical_components_collapse() {
    let one = pack(&[Component::new(1.0, 0.4, 1.3)]);
    let two = pack(&[Component::new(0.3, 0.4, 1.3), Component::new(0.7, 0.4, 1.3)]);
    let data = [0.1, -2.0, 3.3, 0.4];
    assert!((marginal_log_likelihood(&one, &data) - marginal_log_likelihood(&two, &data)).abs() < 1e-12);
}

#[test]
fn marginal_likelihood_equals_sum_over_allocations() {
    let mut rng = ChainRng::seed_from_u64(3);
    for trial in 0..60 {
        let k = 1 + trial % 3;
        let n = 1 + trial % 6;
        let comps = random_mixture(k, &mut rng);
        let params = pack(&comps);
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let mut total = 0.0;
        for code in 0..k.pow(n as u32) {
            let z: Vec<u32> = (0..n).map(|i| ((code / k.pow(i as u32)) % k) as u32).collect();
            let weights: f64 = z.iter().map(|&l| comps[l as usize].weight.ln()).sum();
            total += (allocated_log_likelihood(&params, &z, &data) + weights).exp();
        }
        let direct = marginal_log_likelihood(&params, &data);
        assert!((total.ln() - direct).abs() < 1e-10, "k={k} n={n}: {} vs {direct}", total.ln());
    }
}

proptest! {
    #[test]
    fn mixture_posterior_is_permutation_invariant(seed in 0u64..10_000, k in 1usize..5, shift in 0usize..4) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let comps = random_mixture(k, &mut rng);
        let data: Vec<f64> = (0..8).map(|_| rng.random_range(-4.0..4.0)).collect();
        let hyper = MixtureHyper::from_data(&data);
        let z: Vec<u32> = (0..8).map(|_| rng.random_range(0..k as u32)).collect();
        let mut rotated = comps.clone();
        rotated.rotate_left(shift % k);
        let remap = |l: u32| ((l as usize + k - shift % k) % k) as u32;
        let zr: Vec<u32> = z.iter().map(|&l| remap(l)).collect();
        let a = mixture_log_posterior(&pack(&comps), &data, Some(&z), &hyper);
        let b = mixture_log_posterior(&pack(&rotated), &data, Some(&zr), &hyper);
        prop_assert!((a - b).abs() < 1e-12);
        let a = mixture_log_posterior(&pack(&comps), &data, None, &hyper);
        let b = mixture_log_posterior(&pack(&rotated), &data, None, &hyper);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn changepoint_posterior_finite_inside_and_not_outside(
        seed in 0u64..10_000,
        k in 0usize..4,
    ) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let horizon = 10.0;
        let mut s: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..9.99)).collect();
        s.sort_by(f64::total_cmp);
        let h: Vec<f64> = (0..=k).map(|_| rng.random_range(0.1..5.0)).collect();
        let events: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..horizon)).collect();
        let mut sorted = events.clone();
        sorted.sort_by(f64::total_cmp);
        let params: Vec<f64> = s.iter().chain(&h).copied().collect();
        let hyper = ChangePointHyper::default();
        prop_assert!(changepoint_log_posterior(&params, &sorted, horizon, &hyper).unwrap().is_finite());
        let mut bad = params.clone();
        bad[k] = -1.0;
        prop_assert_eq!(changepoint_log_posterior(&bad, &sorted, horizon, &hyper).unwrap(), f64::NEG_INFINITY);
    }
}

#[test]
fn ar_likelihood_matches_matrix_oracle() {
    let mut rng = ChainRng::seed_from_u64(12);
    for _ in 0..30 {
        let series = simulate_ar(&[0.5, -0.3], 1.0, 60, 20, &mut rng);
        let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let var: f64 = rng.random_range(0.3..3.0);
        let k = 2;
        let rows = series.len() - k;
        let design = DMatrix::from_fn(rows, k, |r, c| series[r + k - 1 - c]);
        let y = DVector::from_iterator(rows, series[k..].iter().copied());
        let e = y - design * DVector::from_row_slice(&a);
        let oracle = -0.5 * rows as f64 * (2.0 * std::f64::consts::PI * var).ln() - e.norm_squared() / (2.0 * var);
        let got = ar_log_likelihood(&[var, a[0], a[1]], &series, k).unwrap();
        assert!((got - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
        let hyper = ArHyper { noise_scale: Some(0.8), ..Default::default() };
        let prior = -0.5 * (a[0] * a[0] + a[1] * a[1]) - (2.0 * std::f64::consts::PI).ln()
            + 2.0 * 0.8f64.ln() - 3.0 * var.ln() - 0.8 / var;
        let post = ar_log_posterior(&[var, a[0], a[1]], &series, &hyper).unwrap();
        assert!((post - (oracle + prior - 5f64.ln())).abs() < 1e-9 * post.abs().max(1.0));
    }
}

#[test]
fn ar_simulation_autocorrelations() {
    let mut rng = ChainRng::seed_from_u64(5);
    let x = simulate_ar(&[0.5, -0.3], 1.0, 500, 200, &mut rng);
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let c = |lag: usize| x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / x.len() as f64;
    let rho1 = 0.5 / 1.3;
    let rho2 = 0.5 * rho1 - 0.3;
    assert!((c(1) / c(0) - rho1).abs() < 0.1);
    assert!((c(2) / c(0) - rho2).abs() < 0.1);
}

#[test]
fn homogeneous_and_void_changepoint_likelihoods() {
    let events = [0.5, 1.2, 7.0];
    let ll = changepoint_log_likelihood(&[2.0], &events, 10.0).unwrap();
    assert!((ll - (3.0 * 2f64.ln() - 20.0)).abs() < 1e-12);
    assert!((changepoint_log_likelihood(&[2.0], &[], 10.0).unwrap() + 20.0).abs() < 1e-12);
    assert!(changepoint_log_likelihood(&[2.0], &[11.0], 10.0).is_err());
}

#[test]
fn changepoint_likelihood_matches_quadrature() {
    let mut rng = ChainRng::seed_from_u64(8);
    let horizon = 20.0;
    for _ in 0..20 {
        let mut s = [rng.random_range(0.5..19.5), rng.random_range(0.5..19.5)];
        s.sort_by(f64::total_cmp);
        let h = [rng.random_range(0.2..4.0), rng.random_range(0.2..4.0), rng.random_range(0.2..4.0)];
        let mut events: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..horizon)).collect();
        events.sort_by(f64::total_cmp);
        let rate = |t: f64| if t < s[0] { h[0] } else if t < s[1] { h[1] } else { h[2] };
        let cells = 400_000;
        let dt = horizon / cells as f64;
        let integral: f64 = (0..cells).map(|i| rate((i as f64 + 0.5) * dt)).sum::<f64>() * dt;
        let oracle = events.iter().map(|&t| rate(t).ln()).sum::<f64>() - integral;
        let got = changepoint_log_likelihood(&[s[0], s[1], h[0], h[1], h[2]], &events, horizon).unwrap();
        assert!((got - oracle).abs() < 1e-4, "{got} vs {oracle}");
    }
}

#[test]
fn changepoint_simulation_mean_count() {
    let mut rng = ChainRng::seed_from_u64(6);
    let reps = 400;
    let total: usize = (0..reps).map(|_| simulate_changepoint(&[2.0], 10.0, &mut rng).unwrap().len()).sum();
    let mean = total as f64 / reps as f64;
    assert!((mean - 20.0).abs() < 3.0 * (20.0 / reps as f64).sqrt());
}

#[test]
fn well_separated_allocations() {
    let comps = [Component::new(0.5, 0.0, 1.0), Component::new(0.5, 100.0, 1.0)];
    let mut rng = ChainRng::seed_from_u64(1);
    let data: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { rng.random_range(-2.0..2.0) } else { 100.0 + rng.random_range(-2.0..2.0) }).collect();
    let mut right = 0usize;
    let reps = 500;
    for _ in 0..reps {
        let z = gibbs_allocations(&pack(&comps), &data, &mut rng);
        right += z.iter().enumerate().filter(|(i, &l)| l as usize == i % 2).count();
    }
    assert!(right as f64 / (reps * data.len()) as f64 > 0.999);
}

#[test]
fn single_component_allocations() {
    let mut rng = ChainRng::seed_from_u64(1);
    let z = gibbs_allocations(&pack(&[Component::new(1.0, 0.0, 1.0)]), &[1.0, -3.0, 8.0], &mut rng);
    assert_eq!(z, vec![0, 0, 0]);
}

#[test]
fn mixture_prior_recovery_chi_square() {
    let hyper = MixtureHyper { k_max: 5, ..MixtureHyper::default() };
    let model = MixtureModel::new(Vec::new(), hyper).unwrap();
    let space = model.space();
    let moves = MoveSet::new().with(1.0, SplitMergeMove::default()).with(1.0, BirthDeathMove);
    let config = SamplerConfig {
        iterations: 100_000,
        burn_in: 1000,
        thin: 10,
        seed: 21,
        record_params: false,
        ..Default::default()
    };
    let trace = revjump::run_sampler(&model, &space, &moves, &config).unwrap();
    let mut counts = vec![0.0; 5];
    for k in trace.replicates[0].models() {
        counts[k - 1] += 1.0;
    }
    let (stat, df, p) = goodness_of_fit(&counts, &[0.2; 5]).unwrap();
    assert!(p > 0.01, "chi2 {stat} on {df}, counts {counts:?}");
}

#[test]
fn changepoint_prior_recovery() {
    // No events and a negligible horizon: the likelihood is flat in practice.
    let model = ChangePointModel::new(Vec::new(), 1e-9, ChangePointHyper { height_rate: Some(1.0), ..Default::default() }).unwrap();
    let space = model.space();
    let config = SamplerConfig {
        iterations: 100_000,
        burn_in: 1000,
        thin: 10,
        seed: 2,
        record_params: false,
        ..Default::default()
    };
    let moves = MoveSet::new().with(1.0, revjump::models::changepoint::ChangePointBirthDeath);
    let trace = revjump::run_sampler(&model, &space, &moves, &config).unwrap();
    let mut counts = vec![0.0; 11];
    for k in trace.replicates[0].models() {
        counts[k] += 1.0;
    }
    let probs: Vec<f64> = (0..=10).map(|k| space.model_prior(k)).collect();
    let (stat, df, p) = goodness_of_fit(&counts, &probs).unwrap();
    assert!(p > 0.01, "chi2 {stat} on {df}, counts {counts:?}");
}

#[test]
fn deviance_is_minus_twice_log_likelihood() {
    let mut rng = ChainRng::seed_from_u64(9);
    let data: Vec<f64> = (0..20).map(|_| rng.random_range(-3.0..3.0)).collect();
    let model = MixtureModel::with_defaults(data.clone()).unwrap();
    for _ in 0..20 {
        let comps = random_mixture(3, &mut rng);
        let z = gibbs_allocations(&pack(&comps), &data, &mut rng);
        let state = model.state(&comps, z).unwrap();
        let oracle: f64 = data
            .iter()
            .map(|&x| {
                comps
                    .iter()
                    .map(|c| c.weight * (-(x - c.mean).powi(2) / (2.0 * c.var)).exp() / (2.0 * std::f64::consts::PI * c.var).sqrt())
                    .sum::<f64>()
                    .ln()
            })
            .sum();
        assert!((revjump::diagnostics::deviance(&model, &state) + 2.0 * oracle).abs() < 1e-9);
    }
    let s = ChainState::evaluate(&revjump::models::ConjugateMeanToy::new(vec![0.0], 1.0).unwrap(), 1, vec![], vec![]).unwrap();
    assert!((s.log_likelihood + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
}
