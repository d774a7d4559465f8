#![allow(dead_code)]

use lowthrust_core::control::{switching_function, ExtendedState, Homotopy};
use lowthrust_core::propagation::{propagate, propagate_with_stm, IntegratorSettings, Model};
use lowthrust_core::StateMatrix;

/// Scenario-1 trajectory B, converged from the rounded table entry.
pub const GTO_B: [f64; 7] = [
    15.684996238465695,
    33.03121117199769,
    -0.09381690594530188,
    -0.10207501700905211,
    0.04501282046416282,
    -0.00015063964473412868,
    0.1334329270000306,
];

/// Scenario-2 minimum-fuel extremals converged from the rounded table entries.
pub const HALO_ALPHA: [f64; 7] = [
    0.12602860654470224,
    -0.07664517329117115,
    -0.0563579446057745,
    0.03998592648218685,
    -0.00518490876149484,
    -0.0641017835732643,
    0.022356555237959253,
];
pub const HALO_BETA: [f64; 7] = [
    -0.01485992152705664,
    0.012152179422145812,
    -0.07935748074638664,
    0.01014617150856913,
    0.04457026682444088,
    0.012555736003697701,
    0.07632392438038198,
];
pub const HALO_GAMMA: [f64; 7] = [
    -0.021952329147255287,
    0.0065876370529868635,
    0.074896120381469,
    -0.04314024879392201,
    0.0361453659370948,
    0.038417360647328175,
    0.03479929054171177,
];

/// Jacobi constant written out directly from the effective potential.
pub fn jacobi(y: &ExtendedState, mu: f64) -> f64 {
    let (x, yy, z) = (y.r.x, y.r.y, y.r.z);
    let r1 = ((x + mu).powi(2) + yy * yy + z * z).sqrt();
    let r2 = ((x - 1.0 + mu).powi(2) + yy * yy + z * z).sqrt();
    x * x + yy * yy + 2.0 * (1.0 - mu) / r1 + 2.0 * mu / r2 - y.v.norm_squared()
}

/// Largest column-scaled discrepancy between the propagated STM and a
/// central finite-difference Jacobian of the terminal state, together with
/// the number of switches on the nominal arc.
pub fn stm_fd_error(y0: &ExtendedState, span: (f64, f64), eps: Homotopy, model: &Model, settings: &IntegratorSettings) -> (f64, usize) {
    let (traj, stm) = propagate_with_stm(y0, span, eps, model, settings).expect("nominal arc");
    assert!(traj.halted.is_none());
    let base = y0.to_vector();
    let mut fd = StateMatrix::zeros();
    for j in 0..14 {
        let h = 1e-7 * base[j].abs().max(1.0);
        let mut plus = base;
        let mut minus = base;
        plus[j] += h;
        minus[j] -= h;
        let yp = propagate(&ExtendedState::from_vector(&plus), span, eps, model, settings).unwrap();
        let ym = propagate(&ExtendedState::from_vector(&minus), span, eps, model, settings).unwrap();
        assert_eq!(yp.switch_times.len(), traj.switch_times.len(), "perturbation changed the switch count");
        assert_eq!(ym.switch_times.len(), traj.switch_times.len(), "perturbation changed the switch count");
        let col = (yp.terminal_state.to_vector() - ym.terminal_state.to_vector()) / (2.0 * h);
        fd.set_column(j, &col);
    }
    let mut worst: f64 = 0.0;
    for j in 0..14 {
        let scale = stm.phi.column(j).amax().max(1.0);
        worst = worst.max((stm.phi.column(j) - fd.column(j)).amax() / scale);
    }
    (worst, traj.switch_times.len())
}

/// Sign changes of `S - level` on `n` equally spaced points of `[t0, tf]`,
/// returned as bracketing intervals.
pub fn scan_crossings(samples: &[(f64, ExtendedState)], c_nd: f64, level: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let a = switching_function(&w[0].1, c_nd) - level;
        let b = switching_function(&w[1].1, c_nd) - level;
        if (a > 0.0) != (b > 0.0) {
            out.push((w[0].0, w[1].0));
        }
    }
    out
}
