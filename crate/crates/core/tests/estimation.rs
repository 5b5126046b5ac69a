use revjump::estimation::{bayes_factor_bridge, bayes_factor_visits, posterior_model_probs};
use revjump::models::toy::IndependenceMap;
use revjump::models::ConjugateMeanToy;
use revjump::moves::jump::{JumpMove, NoAux, NormalAux};
use revjump::{AttemptRecord, ModelSpace, MoveSet, SamplerConfig};

fn record(from: usize, to: usize, alpha: f64) -> AttemptRecord {
    AttemptRecord {
        iteration: 1,
        from,
        to,
        alpha,
        accepted: false,
        burn_in: false,
    }
}

#[test]
fn counting_examples() {
    let seq: Vec<usize> = (0..100).map(|i| if i < 60 { 1 } else { 2 }).collect();
    let p = posterior_model_probs(&[seq], 0).unwrap();
    assert!((p.probability(1) - 0.6).abs() < 1e-15);
    let sum: f64 = p.models.iter().map(|m| m.probability).sum();
    assert!((sum - 1.0).abs() < 1e-12);
    let single = posterior_model_probs(&[vec![3; 40]], 5).unwrap();
    assert_eq!(single.models.len(), 1);
    assert_eq!(single.probability(3), 1.0);
}

#[test]
fn visits_examples_and_reciprocity() {
    let space = ModelSpace::uniform(1, 2);
    let equal = posterior_model_probs(&[vec![1, 2, 1, 2]], 0).unwrap();
    assert_eq!(bayes_factor_visits(&equal, 2, 1, &space).unwrap().value, 1.0);
    let seq: Vec<usize> = (0..10).map(|i| if i < 8 { 1 } else { 2 }).collect();
    let p = posterior_model_probs(&[seq], 0).unwrap();
    let b21 = bayes_factor_visits(&p, 2, 1, &space).unwrap().value;
    let b12 = bayes_factor_visits(&p, 1, 2, &space).unwrap().value;
    assert!((b21 - 0.25).abs() < 1e-15);
    assert!((b21 * b12 - 1.0).abs() < 1e-15);
}

#[test]
fn bridge_examples_and_reciprocity() {
    let recs = vec![record(1, 2, 1.0), record(1, 2, 1.0), record(2, 1, 0.5)];
    let b = bayes_factor_bridge(&recs, 2, 1, false, None).unwrap();
    assert_eq!(b.factor.value, 2.0);
    assert_eq!((b.forward_attempts, b.reverse_attempts), (2, 1));
    let recs = vec![record(1, 2, 0.3), record(1, 2, 0.9), record(2, 1, 0.7), record(2, 1, 0.11)];
    let a = bayes_factor_bridge(&recs, 2, 1, false, None).unwrap().factor.value;
    let c = bayes_factor_bridge(&recs, 1, 2, false, None).unwrap().factor.value;
    assert!((a * c - 1.0).abs() < 1e-15);
    assert!(bayes_factor_bridge(&recs[..2], 2, 1, false, None).is_err());
}

fn conjugate_run(space: &ModelSpace, seed: u64) -> (f64, f64, f64, f64) {
    let toy = ConjugateMeanToy::new(vec![0.4, -0.1, 0.9, 0.3, 0.2, 0.6, -0.3, 0.5], 1.0).unwrap();
    let (m, s) = toy.posterior_mean_sd();
    let mv = JumpMove::new(&toy, IndependenceMap, NormalAux { mean: m, sd: 1.5 * s }, NoAux).unwrap();
    let config = SamplerConfig {
        iterations: 50_000,
        burn_in: 500,
        seed,
        ..Default::default()
    };
    let trace = revjump::run_sampler(&toy, space, &MoveSet::new().with(1.0, mv), &config).unwrap();
    let probs = posterior_model_probs(&trace.model_sequences(), 0).unwrap();
    let v = bayes_factor_visits(&probs, 2, 1, space).unwrap();
    let attempts: Vec<AttemptRecord> = trace.attempts().cloned().collect();
    let b = bayes_factor_bridge(&attempts, 2, 1, false, Some(space)).unwrap();
    (v.value, v.std_error, b.factor.value, toy.analytic_log_bayes_factor().exp())
}

#[test]
fn prior_odds_do_not_change_the_visit_estimate() {
    let (a, se_a, _, truth) = conjugate_run(&ModelSpace::uniform(1, 2), 3);
    let (b, se_b, bridge, _) = conjugate_run(&ModelSpace::from_weights(1, vec![2.0, 1.0]), 4);
    assert!((a - b).abs() < 3.0 * (se_a * se_a + se_b * se_b).sqrt(), "{a} vs {b}");
    assert!((a / truth - 1.0).abs() < 0.1 && (b / truth - 1.0).abs() < 0.1);
    assert!((bridge / truth - 1.0).abs() < 0.1);
}
