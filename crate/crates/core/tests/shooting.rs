//! Shooting function, Jacobian, solver and continuation on the halo
//! transfer, against frozen converged extremals.

mod common;

use common::{HALO_ALPHA, HALO_BETA, HALO_GAMMA};
use lowthrust_core::control::{hamiltonian, Homotopy};
use lowthrust_core::propagation::propagate_sampled;
use lowthrust_core::pso::{pso_objective, PsoObjectiveSpec};
use lowthrust_core::shooting::{
    continuation_solve, jacobian_rank_report, printed_half_ulp, shooting_function, shooting_jacobian,
    smoothed_solve, solve_rounded, trust_region_solve, RoundedStart,
};
use lowthrust_core::{ContinuationSchedule, Scenario, ShootingProblem, TrustRegionSettings, Vector7};
use proptest::prelude::*;

/// Minimum-energy extremals reached by continuing the fuel-optimal ones back
/// to `eps = 1`.
const ENERGY_ALPHA: [f64; 7] = [
    0.1489793814771791,
    -0.0713841678070553,
    -0.08676893367743349,
    0.05366343590049294,
    -0.007705968712577053,
    -0.07348991304688351,
    0.024904864657937897,
];
const ENERGY_BETA: [f64; 7] = [
    0.003923601338225882,
    -0.005431307185492036,
    -0.11617422354972728,
    0.0373539629385028,
    0.06151528646314906,
    0.026650231811881198,
    0.09244198100050001,
];
const ENERGY_GAMMA: [f64; 7] = [
    -0.04415536904778433,
    0.00928261386837625,
    0.09542016104876101,
    -0.05778567799504423,
    0.04774611167788365,
    0.0669521422622747,
    0.049829345596109756,
];

fn problem(eps: Homotopy) -> ShootingProblem {
    ShootingProblem::new(&Scenario::l2_to_l1(), eps)
}

fn fd_jacobian(lam: &Vector7, p: &ShootingProblem, h: f64) -> lowthrust_core::Matrix7 {
    let mut out = lowthrust_core::Matrix7::zeros();
    for j in 0..7 {
        let mut a = *lam;
        let mut b = *lam;
        a[j] += h;
        b[j] -= h;
        let col = (shooting_function(&a, p).unwrap() - shooting_function(&b, p).unwrap()) / (2.0 * h);
        out.set_column(j, &col);
    }
    out
}

#[test]
fn jacobian_matches_differences_at_minimum_energy() {
    let p = problem(Homotopy::ENERGY);
    let lam = Vector7::from(ENERGY_GAMMA);
    let jac = shooting_jacobian(&lam, &p).unwrap();
    let fd = fd_jacobian(&lam, &p, 1e-7);
    let err = (jac - fd).amax() / jac.amax();
    assert!(err < 1e-6, "relative error {err:e}");
}

#[test]
fn jacobian_matches_differences_on_bang_bang_extremal() {
    let p = problem(Homotopy::FUEL);
    let lam = Vector7::from(HALO_BETA);
    let jac = shooting_jacobian(&lam, &p).unwrap();
    let fd = fd_jacobian(&lam, &p, 1e-8);
    let err = (jac - fd).amax() / jac.amax();
    assert!(err < 1e-5, "relative error {err:e}");
}

#[test]
fn fuel_optimal_extremals_satisfy_the_boundary_conditions() {
    let p = problem(Homotopy::FUEL);
    for (lam, dm) in [(HALO_ALPHA, 35.34), (HALO_BETA, 81.28), (HALO_GAMMA, 61.27)] {
        let e = shooting_function(&Vector7::from(lam), &p).unwrap();
        assert!(e.amax() < 1e-10, "residual {:e}", e.amax());

        let grid: Vec<f64> = (0..=400).map(|k| p.tof * k as f64 / 400.0).collect();
        let y0 = p.initial_state(&Vector7::from(lam));
        let traj = propagate_sampled(&y0, (0.0, p.tof), p.eps, &p.model, &p.integrator, &grid).unwrap();
        let got = p.delta_m_kg(&traj.terminal_state);
        assert!((got - dm).abs() < 0.5, "dm {got} vs {dm}");
        assert!(traj.samples.windows(2).all(|w| w[1].1.lam_m <= w[0].1.lam_m), "lam_m increased");
        assert!(traj.terminal_state.lam_m.abs() < 1e-10);
    }
}

#[test]
fn minimum_energy_extremals_zero_the_objective() {
    let p = problem(Homotopy::ENERGY);
    let spec = PsoObjectiveSpec::default();
    for lam in [ENERGY_ALPHA, ENERGY_BETA, ENERGY_GAMMA] {
        let rec = trust_region_solve(&Vector7::from(lam), &p, &TrustRegionSettings::default());
        assert!(rec.converged);
        let j = pso_objective(&rec.lam0, &p, &spec);
        assert!(j < 1e-16, "J = {j:e}");

        // The Hamiltonian is conserved along the smooth extremal.
        let grid: Vec<f64> = (0..=100).map(|k| p.tof * k as f64 / 100.0).collect();
        let traj = propagate_sampled(&p.initial_state(&Vector7::from(rec.lam0)), (0.0, p.tof), p.eps, &p.model, &p.integrator, &grid).unwrap();
        let h: Vec<f64> = traj.samples.iter().map(|(_, y)| hamiltonian(y, p.eps, &p.model.spacecraft, &p.model.constants).unwrap()).collect();
        let drift = h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "H drift {drift:e}");
    }
}

#[test]
fn unit_position_residual_weighs_ten() {
    let spec = PsoObjectiveSpec::default();
    assert_eq!(spec.weigh(&Vector7::from([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])), 10.0);
    assert_eq!(spec.weigh(&Vector7::from([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])), 1.0);
    assert_eq!(spec.weigh(&Vector7::from([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])), spec.infeasible_penalty);
}

#[test]
fn converged_start_returns_immediately() {
    let rec = trust_region_solve(&Vector7::from(HALO_GAMMA), &problem(Homotopy::FUEL), &TrustRegionSettings::default());
    assert!(rec.converged);
    assert_eq!(rec.iterations, 0);
    assert_eq!(rec.lam0, HALO_GAMMA);
    assert_eq!(rec.n_switches, 2);
}

#[test]
fn polish_moves_by_ulps_and_never_worsens() {
    let p = problem(Homotopy::FUEL);
    let start = shooting_function(&Vector7::from(HALO_GAMMA), &p).unwrap().amax();
    let settings = TrustRegionSettings { residual_tol: 1e-14, max_iterations: 0, ..Default::default() };
    let rec = trust_region_solve(&Vector7::from(HALO_GAMMA), &p, &settings);
    assert!(rec.residual_inf <= start);
    assert!(rec.evaluations > 1);
    for (a, b) in rec.lam0.iter().zip(HALO_GAMMA) {
        // At most 20 rounds of 8 ulps.
        assert!((a - b).abs() <= 160.0 * f64::EPSILON * b.abs());
    }
    let off = TrustRegionSettings { polish_below: 0.0, ..settings };
    let rec = trust_region_solve(&Vector7::from(HALO_GAMMA), &p, &off);
    assert_eq!(rec.lam0, HALO_GAMMA);
    assert_eq!(rec.evaluations, 1);
}

#[test]
fn smoothing_chain_lands_on_the_fuel_optimal_extremal() {
    let p = problem(Homotopy::FUEL);
    let rec = smoothed_solve(&Vector7::from(HALO_BETA), &p, &TrustRegionSettings::default(), 1e-2);
    assert!(rec.converged && rec.eps == 0.0);
    assert!((rec.delta_m_kg - 81.28).abs() < 0.5);
}

#[test]
fn rounded_start_rejects_solutions_outside_the_leash() {
    let p = problem(Homotopy::FUEL);
    // The beta literal with a leash too short to reach the extremal.
    let literal = Vector7::from([-0.01486, 0.01215, -0.07936, 0.01015, 0.04457, 0.01256, 0.07632]);
    let half = Vector7::repeat(5e-6);
    let tight = RoundedStart { leash: 0.1, restarts: 2, smoothing_eps: 0.0, ..RoundedStart::new(half) };
    let run = solve_rounded(&literal, &p, &TrustRegionSettings::default(), &tight);
    // The nominal solve still converges, just not within reach.
    assert!(run.record.converged && !run.reproduced);
    assert_eq!(run.starts, 3);
    assert_eq!(run.record.lam0, HALO_BETA);
    let run = solve_rounded(&literal, &p, &TrustRegionSettings::default(), &RoundedStart::new(half));
    assert!(run.record.converged && run.reproduced);
    assert_eq!(run.starts, 1);
}

#[test]
fn full_thrust_guess_has_rank_six() {
    // Full thrust throughout: scaling (lam_r, lam_v) moves neither the
    // position nor the velocity, so the Jacobian loses a direction.
    let lam = [3.780801243799662, -6.682975548178958, 5.6717239700316915, -2.286805897143102, -0.9080155184470712, -8.04635470189659, 10.0];
    let p = problem(Homotopy::ENERGY);
    let (rank, sv) = jacobian_rank_report(&Vector7::from(lam), &p, 1e-9).unwrap();
    assert_eq!(rank, 6, "singular values {sv:?}");

    let base = shooting_function(&Vector7::from(lam), &p).unwrap();
    let mut scaled = lam;
    for v in scaled.iter_mut().take(6) {
        *v *= 1.01;
    }
    let moved = shooting_function(&Vector7::from(scaled), &p).unwrap();
    assert!((moved.rows(0, 6) - base.rows(0, 6)).amax() < 1e-12);
    assert!((moved[6] - base[6]).abs() > 1e-6);
}

#[test]
fn continuation_reaches_the_fuel_optimal_extremal() {
    let p = problem(Homotopy::ENERGY);
    let mut seen = 0;
    let recs = continuation_solve(&Vector7::from(ENERGY_GAMMA), &p, &ContinuationSchedule::default(), &TrustRegionSettings::default(), |_| seen += 1);
    assert_eq!(seen, recs.len());
    assert!(recs.iter().all(|r| r.converged));
    let last = recs.last().unwrap();
    assert_eq!(last.eps, 0.0);
    assert!((last.delta_m_kg - 61.27).abs() < 0.5);
    let dist = last.lam0.iter().zip(HALO_GAMMA).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dist < 1e-8, "distance {dist:e}");
    // Fuel use grows as eps shrinks toward bang-bang.
    assert!(recs.windows(2).all(|w| w[1].delta_m_kg <= w[0].delta_m_kg + 1e-9));
}

#[test]
fn schedule_has_too_few_steps() {
    assert!(ContinuationSchedule::new(1).is_err());
    assert_eq!(ContinuationSchedule::new(2).unwrap().epsilons, vec![1.0, 0.0]);
}

proptest! {
    #[test]
    fn schedule_is_quadratic_and_exact_at_the_ends(n in 2usize..400) {
        let s = ContinuationSchedule::new(n).unwrap();
        prop_assert_eq!(s.epsilons.len(), n);
        prop_assert_eq!(s.epsilons[0], 1.0);
        prop_assert_eq!(s.epsilons[n - 1], 0.0);
        prop_assert!(s.epsilons.windows(2).all(|w| w[1] < w[0]));
        for (k, e) in s.epsilons.iter().enumerate() {
            let j = (n - k) as f64;
            let expected = (j * j - 1.0) / ((n * n) as f64 - 1.0);
            prop_assert!((e - expected).abs() <= f64::EPSILON * expected);
        }
    }

    #[test]
    fn half_ulp_brackets_the_rounding(int in -999i64..999, frac in 0u32..100_000, digits in 1usize..6) {
        let frac = frac % 10u32.pow(digits as u32);
        let lit = format!("{int}.{frac:0digits$}");
        let h = printed_half_ulp(&lit).unwrap();
        prop_assert!((h - 0.5 * 10f64.powi(-(digits as i32))).abs() < 1e-18);
        // Any value within the half-ulp prints back to the same literal.
        let v: f64 = lit.parse().unwrap();
        for x in [v - 0.99 * h, v + 0.99 * h] {
            let back = format!("{:.*}", digits, x);
            prop_assert_eq!(back.parse::<f64>().unwrap(), v);
        }
    }
}
