use impulse_core::cost::{CostKind, ImpulseCost};
use impulse_core::ergodic::{self, Schedule};
use impulse_core::impulse::Strategy;
use impulse_core::model::{self, Domain, MarkovModel};
use impulse_core::{oracle, problems, Error};

#[test]
fn random_instances_match_enumeration() {
    for seed in 0..6 {
        let p = problems::random_ctmc(seed, 7, 2).unwrap();
        let sched = Schedule::default_for(&p.model, &p.cost).unwrap();
        let s = ergodic::solve_full(&p.model, &p.cost, &p.f, &sched).unwrap();
        let o = oracle::policy_enumeration_oracle(&p.model, &p.cost, &p.f, 5_000_000).unwrap();
        assert!((s.lambda - o.lambda).abs() < 1e-6, "seed {seed}: {} vs {}", s.lambda, o.lambda);
        let ev = oracle::evaluate_strategy_exact(&p.model, &p.cost, &p.f, &s.strategy).unwrap();
        assert!((ev.best_from_targets - o.lambda).abs() < 1e-6, "seed {seed}");
        assert!(s.lambda <= s.mu_f + 1e-9);
    }
}

#[test]
fn constant_running_cost_never_moves() {
    let p = problems::constant_f(3.0).unwrap();
    let sched = Schedule::default_for(&p.model, &p.cost).unwrap();
    let s = ergodic::solve_full(&p.model, &p.cost, &p.f, &sched).unwrap();
    assert!((s.lambda - 3.0).abs() < 1e-9);
    assert!(s.strategy.is_empty());
}

#[test]
fn inventory_uses_impulses() {
    let p = problems::birth_death_inventory().unwrap();
    let sched = Schedule::default_for(&p.model, &p.cost).unwrap();
    let s = ergodic::solve_full(&p.model, &p.cost, &p.f, &sched).unwrap();
    assert!(s.lambda < s.mu_f);
    assert!(s.strategy.impulse_region[0]);
    let ev = oracle::evaluate_strategy_exact(&p.model, &p.cost, &p.f, &s.strategy).unwrap();
    assert!((ev.best_from_targets - s.lambda).abs() < 1e-6);
    assert!((s.domain_lambdas.last().unwrap() - s.lambda).abs() < 1e-6);
}

#[test]
fn coarse_drift_is_near_renewal_optimum() {
    let p = problems::drift_example(0.01, 10.0, 0.0, 10.0, 1.0, 1.0).unwrap();
    let sched = Schedule::default_for(&p.model, &p.cost).unwrap();
    let s = ergodic::solve_full(&p.model, &p.cost, &p.f, &sched).unwrap();
    let r = p.renewal.unwrap();
    let o = oracle::renewal_oracle(&r.f, r.c, &r.targets, r.length, 2000).unwrap();
    assert!((s.lambda - o.lambda).abs() < 2e-2, "{} vs {}", s.lambda, o.lambda);
}

#[test]
fn reducible_chain_is_rejected() {
    let m = MarkovModel::from_dense(
        vec!["a".into(), "b".into(), "c".into()],
        None,
        &[vec![0.0, 0.0, 0.0], vec![1.0, -2.0, 1.0], vec![0.0, 0.0, 0.0]],
        0.1,
    )
    .unwrap();
    assert!(matches!(model::invariant_measure(&m), Err(Error::Reducible { .. })));
}

#[test]
fn negative_cost_names_the_floor() {
    let m = problems::constant_f(1.0).unwrap().model;
    let e = ImpulseCost::new(&m, vec![0], CostKind::Constant { value: -1.0 }, None).unwrap_err();
    assert!(e.to_string().contains("c(x,ξ) ≥ c > 0"), "{e}");
}

#[test]
fn strategy_with_target_in_region_is_invalid() {
    let p = problems::constant_f(1.0).unwrap();
    let s = Strategy::from_pairs(10, &[(0, 5), (5, 0)]);
    assert!(matches!(s.validate(&p.cost), Err(Error::TargetInImpulseRegion { .. })));
    let ok = Strategy::from_pairs(10, &[(9, 5)]);
    assert!(ok.validate(&p.cost).is_ok());
    assert!(Domain::full(10).is_full());
}
