//! Swarm invariants on cheap analytic objectives.

use std::time::Duration;

use lowthrust_core::pso::{pso_minimize, Position};
use lowthrust_core::{StopReason, SwarmConfig};
use proptest::prelude::*;

fn sphere(x: &Position) -> f64 {
    x.iter().enumerate().map(|(i, v)| (v - 0.1 * i as f64).powi(2)).sum()
}

fn rastrigin(x: &Position) -> f64 {
    x.iter().map(|v| v * v - 10.0 * (std::f64::consts::TAU * v).cos() + 10.0).sum()
}

fn small(seed: u64, size: usize, iters: usize) -> SwarmConfig {
    SwarmConfig {
        swarm_size: size,
        init_lower: [-3.0, -3.0, -3.0, -3.0, -3.0, -3.0, 0.0],
        init_upper: [2.0; 7],
        search_lower: [-4.0, -4.0, -4.0, -4.0, -4.0, -4.0, 0.0],
        search_upper: [4.0; 7],
        max_iterations: iters,
        rng_seed: seed,
        ..SwarmConfig::default()
    }
}

fn inside(x: &Position, c: &SwarmConfig) -> bool {
    (0..7).all(|d| x[d] >= c.search_lower[d] && x[d] <= c.search_upper[d])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn best_is_monotone_feasible_and_consistent(seed in any::<u64>(), size in 2usize..60, iters in 1usize..80) {
        let config = small(seed, size, iters);
        let f = |x: &Position| {
            // Every evaluated point lies in the search box.
            assert!(inside(x, &config));
            rastrigin(x)
        };
        let mut reported = Vec::new();
        let res = pso_minimize(&f, &config, |p| reported.push(p.best_value)).unwrap();
        prop_assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(&res.history, &reported);
        prop_assert_eq!(res.history.len(), res.iterations + 1);
        prop_assert_eq!(res.evaluations, size * (res.iterations + 1));
        prop_assert!(res.iterations <= iters);
        prop_assert!(inside(&res.best_position, &config));
        prop_assert_eq!(rastrigin(&res.best_position), res.best_value);
        prop_assert_eq!(*res.history.last().unwrap(), res.best_value);
    }

    #[test]
    fn seeded_runs_repeat(seed in any::<u64>(), size in 2usize..40) {
        let config = small(seed, size, 30);
        let a = pso_minimize(&sphere, &config, |_| {}).unwrap();
        let b = pso_minimize(&sphere, &config, |_| {}).unwrap();
        prop_assert_eq!(a.best_position, b.best_position);
        prop_assert_eq!(a.history, b.history);
        prop_assert_eq!(a.stop_reason, b.stop_reason);
    }

    #[test]
    fn nan_objective_never_wins(seed in any::<u64>()) {
        let config = small(seed, 20, 20);
        let f = |x: &Position| if x[0] > 0.0 { f64::NAN } else { sphere(x) };
        let res = pso_minimize(&f, &config, |_| {}).unwrap();
        prop_assert!(res.best_value.is_finite());
        prop_assert!(res.best_position[0] <= 0.0);
    }
}

#[test]
fn sphere_minimum_is_found() {
    let config = SwarmConfig { stall_tolerance: 0.0, ..small(3, 60, 400) };
    let res = pso_minimize(&sphere, &config, |_| {}).unwrap();
    assert!(res.best_value < 1e-10, "J = {:e}", res.best_value);
    for (i, x) in res.best_position.iter().enumerate() {
        assert!((x - 0.1 * i as f64).abs() < 1e-4);
    }
}

#[test]
fn zero_wall_time_stops_before_the_first_iteration() {
    let config = SwarmConfig { max_wall_time: Duration::ZERO, ..small(1, 10, 100) };
    let res = pso_minimize(&sphere, &config, |_| {}).unwrap();
    assert_eq!(res.stop_reason, StopReason::WallTime);
    assert_eq!(res.iterations, 0);
    assert_eq!(res.evaluations, 10);
}

#[test]
fn constant_objective_stalls_after_the_stall_window() {
    let config = small(0, 10, 1000);
    let res = pso_minimize(&|_: &Position| 1.0, &config, |_| {}).unwrap();
    assert_eq!(res.stop_reason, StopReason::Stall);
    assert_eq!(res.iterations, config.stall_iterations);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut c = small(0, 10, 10);
    c.swarm_size = 1;
    assert!(pso_minimize(&sphere, &c, |_| {}).is_err());
    let mut c = small(0, 10, 10);
    c.init_upper[2] = 5.0;
    assert!(pso_minimize(&sphere, &c, |_| {}).is_err());
    let mut c = small(0, 10, 10);
    c.inertia_range = (0.0, 1.0);
    assert!(pso_minimize(&sphere, &c, |_| {}).is_err());
}
