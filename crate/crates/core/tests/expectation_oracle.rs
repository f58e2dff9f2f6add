//! Exact Gaussian expectations against sampled means.

mod common;

use stochastic_barrier::presets;

#[test]
fn exact_expectation_matches_sampling() {
    for (i, (name, _)) in presets::ALL.iter().enumerate() {
        let p = presets::load(name).unwrap().unwrap();
        let p = p.with_sigma(p.sigma_default.unwrap_or(1.0));
        let b = common::test_barrier(p.state());
        let exact = common::exact_expectation(&p, &b);
        for (j, x) in common::random_states(&p, 3, 100 + i as u64).iter().enumerate() {
            let want = exact.evaluate_at(p.state(), x).unwrap();
            let (mean, se) = common::sampled_expectation(&p, &b, x, 200_000, (i * 10 + j) as u64);
            assert!((mean - want).abs() <= 4.0 * se + 1e-12, "{name} at {x:?}: exact {want}, sampled {mean} +- {se}");
        }
    }
}

#[test]
fn step_expectation_agrees_for_discrete_presets() {
    for name in ["dt-pop", "dt-pop-linear"] {
        let p = presets::load(name).unwrap().unwrap().with_sigma(0.3);
        let b = common::test_barrier(p.state());
        let a = p.step_expectation(&b).unwrap();
        let e = common::exact_expectation(&p, &b);
        for x in common::random_states(&p, 5, 9) {
            let (u, v) = (a.evaluate_at(p.state(), &x).unwrap(), e.evaluate_at(p.state(), &x).unwrap());
            assert!((u - v).abs() <= 1e-9 * (1.0 + v.abs()), "{name}: {u} vs {v}");
        }
    }
}

#[test]
fn continuous_presets_reject_step_expectation() {
    let p = presets::load("ct-1d").unwrap().unwrap();
    assert!(p.step_expectation(&common::test_barrier(p.state())).is_err());
}
