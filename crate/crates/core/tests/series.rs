//! Truncated BBGKY series, marginal and correlation functionals, and the
//! kinetic equation built on them.

use qkinetic::solvers::*;
use qkinetic::testing::{default_initial, default_model, random_density, rng};
use qkinetic::ManyBodyOperator;

fn cfg(n_max: usize) -> SeriesConfig {
    SeriesConfig::default().with_order(n_max)
}

#[test]
fn two_particle_functional_splits_into_product_and_correlation() {
    let m = default_model(0.5);
    let f1 = default_initial(0.1);
    for n_max in 0..=4 {
        let c = cfg(n_max);
        let f2 = marginal_functional(&m, 2, 0.3, &f1, &c).unwrap();
        let g2 = correlation_functional(&m, 2, 0.3, &f1, &c).unwrap();
        let split = &f1.tensor(&f1).unwrap() + &g2;
        assert!(f2.max_abs_diff(&split) < 1e-14, "n_max = {n_max}");
    }
}

#[test]
fn correlations_agree_across_routes() {
    let m = default_model(0.5);
    let f0 = default_initial(0.1);
    let t = 0.3;
    let mut previous = f64::INFINITY;
    for n_max in [1, 2, 3] {
        let c = cfg(n_max);
        let state = MarginalState {
            marginals: (1..=2).map(|s| bbgky_marginal(&m, s, t, &f0, &c).unwrap()).collect(),
        };
        let via_marginals = correlation_from_marginals(&state, 2).unwrap();
        let f1_t = kinetic_solution(&m, t, &f0, &c).unwrap();
        let via_functional = correlation_functional(&m, 2, t, &f1_t, &c).unwrap();
        let r = (&via_marginals - &via_functional).trace_norm();
        assert!(r < previous, "n_max = {n_max}: {r} vs {previous}");
        previous = r;
    }
    assert!(previous < 1e-10);
}

#[test]
fn first_correlation_is_the_marginal_itself() {
    let f = default_initial(0.1);
    let state = MarginalState { marginals: vec![f.clone()] };
    assert!(correlation_from_marginals(&state, 1).unwrap().max_abs_diff(&f) < 1e-16);
    assert!(correlation_from_marginals(&state, 2).is_err());
}

#[test]
fn correlation_of_a_product_state_vanishes() {
    let mut g = rng(200);
    let f = random_density(&mut g, 2, 0.1);
    let state = MarginalState {
        marginals: (1..=3).map(|s| f.tensor_power(s).unwrap()).collect(),
    };
    for s in 2..=3 {
        assert!(correlation_from_marginals(&state, s).unwrap().max_abs() < 1e-16);
    }
}

#[test]
fn kinetic_solution_respects_norm_bound() {
    let m = default_model(0.5);
    let f0 = default_initial(0.1);
    let n0 = f0.trace_norm();
    for n_max in 0..=4 {
        let f1 = kinetic_solution(&m, 0.4, &f0, &cfg(n_max)).unwrap();
        assert!(f1.trace_norm() <= n0 * (2.0 * n0).exp());
        assert!((f1.trace() - f0.trace()).norm() < 1e-12);
        assert!(f1.hermiticity_defect() < 1e-11);
    }
}

#[test]
fn derivative_at_initial_time_is_one_sided() {
    let m = default_model(0.5);
    let report = derivative_consistency(&m, 0.0, &default_initial(0.1), &cfg(4)).unwrap();
    assert!(report.one_sided);
    assert!((1.5..=2.5).contains(&report.ratio), "ratio {}", report.ratio);
    let interior = derivative_consistency(&m, 0.3, &default_initial(0.1), &cfg(4)).unwrap();
    assert!(!interior.one_sided);
}

#[test]
fn product_identity_is_exact_at_full_inner_order() {
    let m = default_model(0.5);
    let f0 = default_initial(0.1);
    let c = cfg(2);
    let r = product_identity_residual(&m, 1, 1, 0.4, &f0, &c, 4).unwrap();
    assert!(r < 1e-14, "{r}");
    let truncated = product_identity_residual(&m, 1, 1, 0.4, &f0, &c, 2).unwrap();
    assert!(truncated > r);
}

#[test]
fn observables_of_product_states() {
    let mut g = rng(201);
    let f = random_density(&mut g, 2, 1.0);
    let a = qkinetic::testing::random_hermitian(&mut g, 2, 1);
    let mean = observable_average(&a, &f).unwrap();
    let oracle = a.compose(&f).unwrap().trace().re;
    assert!((mean - oracle).abs() < 1e-14);

    // Without correlations the dispersion is the one-particle variance.
    let zero = ManyBodyOperator::zeros(2, 2);
    let var = dispersion(&a, &f, &zero).unwrap();
    let a2 = a.compose(&a).unwrap().compose(&f).unwrap().trace().re;
    assert!((var - (a2 - mean * mean)).abs() < 1e-14);

    let aa = a.tensor(&a).unwrap();
    let ff = f.tensor(&f).unwrap();
    let two = observable_average(&aa, &ff).unwrap();
    assert!((two - mean * mean / 2.0).abs() < 1e-14);
}

#[test]
fn collision_integral_is_traceless() {
    let m = default_model(0.5);
    let f0 = default_initial(0.1);
    for t in [0.0, 0.2, 0.4] {
        let f1 = kinetic_solution(&m, t, &f0, &cfg(3)).unwrap();
        assert!(collision_integral(&m, t, &f1, &cfg(3)).unwrap().trace().norm() < 1e-12);
    }
}

#[test]
fn configs_reject_bad_values() {
    let bad = SeriesConfig { dt: 0.0, ..SeriesConfig::default() };
    assert!(bad.validate().is_err());
    let bad = ContractionConfig { max_iters: 0, ..ContractionConfig::default() };
    assert!(bad.validate().is_err());
}
