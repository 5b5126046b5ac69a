use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use revjump::diagnostics::psrf::reference_points;
use revjump::diagnostics::ks::ks_statistic;
use revjump::diagnostics::{distance_psrf, model_indicator_chisq, model_indicator_ks, mpsrf, relabel_by_constraint, ReferencePoint};
use revjump::models::mixture::{mixture_log_posterior, pack, unpack, Component};
use revjump::models::{MixtureHyper, MixtureModel};
use revjump::moves::mixture::{BirthDeathMove, SplitMergeMove};
use revjump::{ChainRng, MoveSet, SamplerConfig};

proptest! {
    #[test]
    fn ks_symmetric_and_bounded(a in prop::collection::vec(1usize..6, 1..80), b in prop::collection::vec(1usize..6, 1..80)) {
        let d = ks_statistic(&a, &b);
        prop_assert_eq!(d, ks_statistic(&b, &a));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn chisq_invariant_to_chain_order(chains in prop::collection::vec(prop::collection::vec(1usize..5, 50), 2..5), rot in 0usize..4) {
        let mut other = chains.clone();
        let r = rot % chains.len();
        other.rotate_left(r);
        let a = model_indicator_chisq(&chains, 1, &[50]).unwrap();
        let b = model_indicator_chisq(&other, 1, &[50]).unwrap();
        prop_assert!((a.last_value().unwrap() - b.last_value().unwrap()).abs() < 1e-9);
        prop_assert_eq!(a.points[0].df, b.points[0].df);
    }

    #[test]
    fn relabel_idempotent_and_likelihood_preserving(seed in 0u64..100_000, k in 1usize..6) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let comps: Vec<Component> = raw.iter().map(|w| Component::new(w / total, rng.random_range(-5.0..5.0), rng.random_range(0.1..3.0))).collect();
        let data: Vec<f64> = (0..10).map(|_| rng.random_range(-6.0..6.0)).collect();
        let z: Vec<u32> = (0..10).map(|_| rng.random_range(0..k as u32)).collect();
        let hyper = MixtureHyper::from_data(&data);
        let (p, y) = relabel_by_constraint(&pack(&comps), &z);
        prop_assert_eq!(relabel_by_constraint(&p, &y), (p.clone(), y.clone()));
        let means: Vec<f64> = unpack(&p).iter().map(|c| c.mean).collect();
        prop_assert!(means.windows(2).all(|w| w[0] <= w[1]));
        let before = mixture_log_posterior(&pack(&comps), &data, Some(&z), &hyper);
        let after = mixture_log_posterior(&p, &data, Some(&y), &hyper);
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn distance_psrf_ignores_event_order(seed in 0u64..10_000) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let mut chain = || -> Vec<Vec<Vec<f64>>> {
            (0..30).map(|_| (0..rng.random_range(1..4)).map(|_| vec![rng.random::<f64>(), rng.random_range(-2.0..2.0)]).collect()).collect()
        };
        let traces = vec![chain(), chain()];
        let reversed: Vec<Vec<Vec<Vec<f64>>>> = traces.iter().map(|c| c.iter().map(|s| s.iter().rev().cloned().collect()).collect()).collect();
        let refs = reference_points(&traces, 5, &mut ChainRng::seed_from_u64(1)).unwrap();
        let a = distance_psrf(&traces, &refs, &[30]).unwrap();
        let b = distance_psrf(&reversed, &refs, &[30]).unwrap();
        for (x, y) in a.series.iter().zip(&b.series) {
            let (x, y) = (x.last_value().unwrap(), y.last_value().unwrap());
            prop_assert!((x - y).abs() < 1e-12 * x.max(1.0));
        }
    }
}

#[test]
fn ks_examples() {
    let a = vec![1, 2, 3, 2, 2, 1];
    let s = model_indicator_ks(&[a.clone(), a], 1, &[6]).unwrap();
    assert_eq!(s[0].points[0].value, Some(0.0));
    assert_eq!(s[0].points[0].p_value, Some(1.0));
    let s = model_indicator_ks(&[vec![1; 10], vec![2; 10]], 2, &[1, 10]).unwrap();
    assert_eq!(s[0].points[0].value, None);
    assert_eq!(s[0].points[1].value, Some(1.0));
}

fn normal_chain(rng: &mut ChainRng, n: usize, shift: f64) -> Vec<(usize, f64)> {
    (0..n)
        .map(|_| {
            let k = if rng.random::<f64>() < 0.4 { 1 } else { 2 };
            (k, k as f64 + shift + rng.sample::<f64, _>(StandardNormal))
        })
        .collect()
}

#[test]
fn mpsrf_on_independent_and_shifted_chains() {
    let mut rng = ChainRng::seed_from_u64(4);
    let chains: Vec<_> = (0..4).map(|_| normal_chain(&mut rng, 10_000, 0.0)).collect();
    let r = mpsrf(&chains, &[10_000]).unwrap();
    for v in [r.v_ratio.last_value().unwrap(), r.w_ratio.last_value().unwrap()] {
        assert!((0.9..=1.1).contains(&v), "{v}");
    }
    let mut shifted = chains.clone();
    shifted[0] = normal_chain(&mut rng, 10_000, 10.0);
    let r = mpsrf(&shifted, &[10_000]).unwrap();
    assert!(r.v_ratio.last_value().unwrap() > 5.0);
    assert!(r.w_ratio.last_value().unwrap() > 5.0);
}

#[test]
fn distance_psrf_conventions() {
    let single = vec![vec![vec![0.5, 1.0]]; 20];
    let refs = vec![ReferencePoint { coords: vec![0.0, 0.0] }, ReferencePoint { coords: vec![0.5, 1.0] }];
    let r = distance_psrf(&[single.clone(), single], &refs, &[10, 20]).unwrap();
    for s in &r.series {
        assert!(s.points.iter().all(|p| p.value == Some(1.0)));
    }
}

#[test]
fn distance_psrf_on_stationary_mixture_chains() {
    let model = MixtureModel::new(Vec::new(), MixtureHyper { k_max: 5, ..MixtureHyper::default() }).unwrap();
    let space = model.space();
    let moves = MoveSet::new().with(1.0, SplitMergeMove::default()).with(1.0, BirthDeathMove);
    let config = SamplerConfig {
        iterations: 10_000,
        burn_in: 0,
        replicates: 4,
        seed: 31,
        ..Default::default()
    };
    let trace = revjump::run_sampler(&model, &space, &moves, &config).unwrap();
    let events: Vec<Vec<Vec<Vec<f64>>>> = trace
        .replicates
        .iter()
        .map(|r| {
            r.samples
                .iter()
                .map(|s| unpack(&s.params).iter().map(|c| vec![c.weight, c.mean, c.var]).collect())
                .collect()
        })
        .collect();
    let refs = reference_points(&events, 100, &mut ChainRng::seed_from_u64(7)).unwrap();
    let r = distance_psrf(&events, &refs, &[10_000]).unwrap();
    assert_eq!(r.series.len(), 100);
    let max = r.max.last_value().unwrap();
    assert!(max < 1.1, "{max}");
}
