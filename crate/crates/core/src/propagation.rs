//! Propagation of the extremal ODE with exact switch location.
//!
//! Each segment is integrated with the throttle branch pinned to one regime,
//! so the right-hand side stays smooth inside every step. Crossings of the
//! regime boundaries are bracketed on the continuous extension, polished by
//! Newton iterations on direct partial steps, and become nodes where the
//! integration restarts in the next regime. When the state-transition matrix
//! is carried along, bang-bang switches apply the jump matrix.

use std::fmt;

use crate::control::{
    jump_matrix, regime_jacobian, regime_rhs, switching_function, switching_gradient, ExtendedState, Homotopy,
    StateMatrix, ThrottleRegime, STATE_DIM,
};
use crate::dynamics::{primary_distances, SpacecraftParams, SystemConstants};
use crate::error::{Error, Result};
use crate::ode::{OdeSystem, Stepper, StepperConfig};

/// Equatorial radius of the Earth, km.
pub const EARTH_RADIUS_KM: f64 = 6378.0;
/// Equatorial radius of the Moon, km.
pub const MOON_RADIUS_KM: f64 = 1737.0;
/// Mass (in units of the initial mass) below which propagation stops.
pub const MASS_FLOOR: f64 = 0.01;

const STM_DIM: usize = STATE_DIM + STATE_DIM * STATE_DIM;

/// Primary-pair constants together with the spacecraft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub constants: SystemConstants,
    pub spacecraft: SpacecraftParams,
}

/// Why a propagation stopped before the final time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    /// Passed below the surface of primary 1 or 2.
    Collision { primary: u8 },
    /// Reached a point-mass singularity.
    Singularity { primary: u8 },
    /// Mass fell below [`MASS_FLOOR`].
    MassFloor,
    /// The state stopped being finite.
    NonFinite,
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Collision { primary } => write!(f, "surface collision with primary {primary}"),
            Self::Singularity { primary } => write!(f, "singularity at primary {primary}"),
            Self::MassFloor => write!(f, "mass below floor"),
            Self::NonFinite => write!(f, "non-finite state"),
        }
    }
}

/// Accuracy contract and physical guards for a propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Relative time tolerance for switch location.
    pub event_tol: f64,
    pub max_steps: usize,
    /// Radii of the first and second primary, LU.
    pub body_radii: [f64; 2],
    pub mass_floor: f64,
    /// Interior points per step screened for a regime crossing.
    pub event_samples: usize,
}

impl IntegratorSettings {
    pub fn new(constants: &SystemConstants) -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-14,
            event_tol: 4.0 * f64::EPSILON,
            max_steps: 500_000,
            body_radii: [EARTH_RADIUS_KM / constants.lu, MOON_RADIUS_KM / constants.lu],
            mass_floor: MASS_FLOOR,
            event_samples: 8,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }

    fn stepper_config(&self, error_dim: Option<usize>) -> StepperConfig {
        StepperConfig { abs_tol: self.abs_tol, rel_tol: self.rel_tol, max_steps: self.max_steps, error_dim }
    }
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self::new(&SystemConstants::earth_moon(1.0))
    }
}

/// Nodes of a propagated extremal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySolution {
    /// Node epochs, strictly increasing.
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    /// Regime in force on the segment that starts at each node.
    pub regimes: Vec<ThrottleRegime>,
    /// Epochs of the detected regime changes; each is also a node.
    pub switch_times: Vec<f64>,
    /// Node index of each switch.
    pub switch_nodes: Vec<usize>,
    pub terminal_state: ExtendedState,
    pub halted: Option<HaltReason>,
    /// Dense-output samples at requested epochs.
    pub samples: Vec<(f64, ExtendedState)>,
    pub accepted_steps: usize,
    pub rhs_evaluations: usize,
}

impl TrajectorySolution {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    /// Time spent in each regime, TU.
    pub fn regime_durations(&self) -> [(ThrottleRegime, f64); 3] {
        let mut out = [(ThrottleRegime::Coast, 0.0), (ThrottleRegime::Intermediate, 0.0), (ThrottleRegime::FullThrust, 0.0)];
        for w in 0..self.times.len().saturating_sub(1) {
            let dt = self.times[w + 1] - self.times[w];
            let slot = match self.regimes[w] {
                ThrottleRegime::Coast => 0,
                ThrottleRegime::Intermediate => 1,
                ThrottleRegime::FullThrust => 2,
            };
            out[slot].1 += dt;
        }
        out
    }
}

/// `Phi(t_f, t_i)` of the extended state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTransition {
    pub phi: StateMatrix,
}

/// Halt reason when the spacecraft is below either primary's surface.
pub fn surface_collision_guard(state: &ExtendedState, constants: &SystemConstants, body_radii: [f64; 2]) -> Option<HaltReason> {
    let (r1, r2) = primary_distances(&state.r, constants.mu);
    if r1 < body_radii[0] {
        Some(HaltReason::Collision { primary: 1 })
    } else if r2 < body_radii[1] {
        Some(HaltReason::Collision { primary: 2 })
    } else {
        None
    }
}

fn physical_guard(state: &ExtendedState, model: &Model, settings: &IntegratorSettings) -> Option<HaltReason> {
    if !state.is_finite() {
        return Some(HaltReason::NonFinite);
    }
    surface_collision_guard(state, &model.constants, settings.body_radii).or(if state.m < settings.mass_floor {
        Some(HaltReason::MassFloor)
    } else {
        None
    })
}

/// Extremal dynamics on one regime, optionally with the variational equations.
struct ExtremalSystem<'a> {
    model: &'a Model,
    eps: Homotopy,
    regime: ThrottleRegime,
    with_stm: bool,
}

impl OdeSystem for ExtremalSystem<'_> {
    fn dim(&self) -> usize {
        if self.with_stm {
            STM_DIM
        } else {
            STATE_DIM
        }
    }

    fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let state = ExtendedState::from_slice(y);
        let sc = &self.model.spacecraft;
        let k = &self.model.constants;
        let rate = regime_rhs(&state, self.regime, self.eps, sc, k)?;
        dy[..STATE_DIM].copy_from_slice(rate.as_slice());
        if self.with_stm {
            let f = regime_jacobian(&state, self.regime, self.eps, sc, k)?;
            let phi = StateMatrix::from_column_slice(&y[STATE_DIM..]);
            let dphi = f * phi;
            dy[STATE_DIM..].copy_from_slice(dphi.as_slice());
        }
        Ok(())
    }
}

/// Which side of the current regime was violated.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Boundary {
    /// `S` rose above `threshold`.
    Upper(f64),
    /// `S` fell below `threshold`.
    Lower(f64),
}

impl Boundary {
    fn threshold(self) -> f64 {
        match self {
            Self::Upper(x) | Self::Lower(x) => x,
        }
    }
}

/// Amount by which `S` must pass a boundary before a crossing is declared.
/// Just after a switch `S` sits on the boundary to rounding.
const CROSSING_SLACK: f64 = 1e-13;

fn violation(regime: ThrottleRegime, s: f64, eps: f64, slack: f64) -> Option<Boundary> {
    match regime {
        ThrottleRegime::Coast if s < eps - slack => Some(Boundary::Lower(eps)),
        ThrottleRegime::FullThrust if s > -eps + slack => Some(Boundary::Upper(-eps)),
        ThrottleRegime::Intermediate if s > eps + slack => Some(Boundary::Upper(eps)),
        ThrottleRegime::Intermediate if s < -eps - slack => Some(Boundary::Lower(-eps)),
        _ => None,
    }
}

fn next_regime(regime: ThrottleRegime, crossed: Boundary, eps: f64) -> ThrottleRegime {
    use ThrottleRegime::*;
    match (regime, crossed) {
        (Coast, _) if eps > 0.0 => Intermediate,
        (Coast, _) => FullThrust,
        (FullThrust, _) if eps > 0.0 => Intermediate,
        (FullThrust, _) => Coast,
        (Intermediate, Boundary::Upper(_)) => Coast,
        (Intermediate, Boundary::Lower(_)) => FullThrust,
    }
}

/// Regime at the initial state; exactly on a boundary the sign of dS/dt decides.
fn initial_regime(state: &ExtendedState, eps: Homotopy, sc: &SpacecraftParams) -> ThrottleRegime {
    let s = switching_function(state, sc.c_nd);
    let e = eps.value();
    let regime = ThrottleRegime::classify(s, eps);
    let on_edge = if e > 0.0 { s.abs() == e } else { s == 0.0 };
    if !on_edge {
        return regime;
    }
    let s_dot = switching_gradient(state, sc).map(|(_, d)| d).unwrap_or(0.0);
    let probe = s + s_dot * 1e-9;
    ThrottleRegime::classify(probe, eps)
}

struct Run<'a> {
    model: &'a Model,
    eps: Homotopy,
    settings: &'a IntegratorSettings,
    with_stm: bool,
    samples: &'a [f64],
}

struct RunOutput {
    traj: TrajectorySolution,
    final_y: Vec<f64>,
}

impl Run<'_> {
    fn execute(&self, y0: &ExtendedState, t_span: (f64, f64)) -> Result<RunOutput> {
        let (t0, tf) = t_span;
        if !(tf >= t0) {
            return Err(Error::InvalidInput(format!("final time {tf} precedes initial time {t0}")));
        }
        let sc = &self.model.spacecraft;
        let eps = self.eps;
        let e = eps.value();
        let dim = if self.with_stm { STM_DIM } else { STATE_DIM };

        let mut y = vec![0.0; dim];
        y0.write_to(&mut y);
        if self.with_stm {
            for i in 0..STATE_DIM {
                y[STATE_DIM + i * STATE_DIM + i] = 1.0;
            }
        }

        let mut regime = initial_regime(y0, eps, sc);
        let mut traj = TrajectorySolution {
            times: vec![t0],
            states: vec![*y0],
            regimes: vec![regime],
            switch_times: Vec::new(),
            switch_nodes: Vec::new(),
            terminal_state: *y0,
            halted: None,
            samples: Vec::new(),
            accepted_steps: 0,
            rhs_evaluations: 0,
        };
        let mut next_sample = 0;
        while next_sample < self.samples.len() && self.samples[next_sample] <= t0 {
            if self.samples[next_sample] == t0 {
                traj.samples.push((t0, *y0));
            }
            next_sample += 1;
        }

        if let Some(reason) = physical_guard(y0, self.model, self.settings) {
            traj.halted = Some(reason);
            return Ok(RunOutput { traj, final_y: y });
        }
        if tf == t0 {
            return Ok(RunOutput { traj, final_y: y });
        }

        let mut sys = ExtremalSystem { model: self.model, eps, regime, with_stm: self.with_stm };
        let mut stepper = Stepper::new(dim, self.settings.stepper_config(Some(STATE_DIM)));
        let mut buf = vec![0.0; dim];
        let mut scratch = vec![0.0; dim + 1];

        if let Err(err) = stepper.reset(&mut sys, t0, &y, tf) {
            return self.halt_or_fail(err, traj, y);
        }

        while stepper.t < tf {
            if let Err(err) = stepper.step(&mut sys, tf) {
                let y_now = stepper.y.clone();
                return self.halt_or_fail(err, traj, y_now);
            }
            let t_b = stepper.t;

            let event = self.find_event(&mut stepper, &mut sys, regime, e, &mut buf)?;
            let (t_node, crossed) = match event {
                Some((t_e, boundary)) => {
                    self.polish_event(&mut stepper, &mut sys, t_e, boundary, &mut scratch)?;
                    (scratch[0], Some(boundary))
                }
                None => (t_b, None),
            };

            // Samples inside the (possibly truncated) step.
            while next_sample < self.samples.len() && self.samples[next_sample] <= t_node {
                let ts = self.samples[next_sample];
                if ts > traj.times[traj.times.len() - 1] {
                    stepper.interpolate(&mut sys, ts, &mut buf)?;
                    traj.samples.push((ts, ExtendedState::from_slice(&buf)));
                }
                next_sample += 1;
            }

            match crossed {
                None => {
                    let state = ExtendedState::from_slice(&stepper.y);
                    traj.times.push(t_b);
                    traj.states.push(state);
                    traj.regimes.push(regime);
                    if let Some(reason) = physical_guard(&state, self.model, self.settings) {
                        traj.halted = Some(reason);
                        traj.terminal_state = state;
                        return Ok(RunOutput { traj, final_y: stepper.y.clone() });
                    }
                }
                Some(boundary) => {
                    let t_e = scratch[0];
                    let mut y_e = scratch[1..].to_vec();
                    let state = ExtendedState::from_slice(&y_e);
                    let new_regime = next_regime(regime, boundary, e);
                    if self.with_stm && e == 0.0 {
                        let before = regime_rhs(&state, regime, eps, sc, &self.model.constants)?;
                        let after = regime_rhs(&state, new_regime, eps, sc, &self.model.constants)?;
                        let psi = jump_matrix(&state, &before, &after, sc)?;
                        let phi = StateMatrix::from_column_slice(&y_e[STATE_DIM..]);
                        y_e[STATE_DIM..].copy_from_slice((psi * phi).as_slice());
                    }
                    regime = new_regime;
                    sys.regime = regime;
                    traj.times.push(t_e);
                    traj.states.push(state);
                    traj.regimes.push(regime);
                    traj.switch_times.push(t_e);
                    traj.switch_nodes.push(traj.times.len() - 1);
                    if let Some(reason) = physical_guard(&state, self.model, self.settings) {
                        traj.halted = Some(reason);
                        traj.terminal_state = state;
                        return Ok(RunOutput { traj, final_y: y_e });
                    }
                    if let Err(err) = stepper.reset(&mut sys, t_e, &y_e, tf) {
                        return self.halt_or_fail(err, traj, y_e);
                    }
                }
            }
        }

        traj.terminal_state = *traj.states.last().unwrap();
        traj.accepted_steps = stepper.accepted;
        traj.rhs_evaluations = stepper.evaluations;
        Ok(RunOutput { traj, final_y: stepper.y.clone() })
    }

    fn halt_or_fail(&self, err: Error, mut traj: TrajectorySolution, y: Vec<f64>) -> Result<RunOutput> {
        let reason = match err {
            Error::Singularity { primary, .. } => HaltReason::Singularity { primary },
            Error::NonFinite(_) => HaltReason::NonFinite,
            other => return Err(other),
        };
        traj.halted = Some(reason);
        traj.terminal_state = *traj.states.last().unwrap();
        Ok(RunOutput { traj, final_y: y })
    }

    /// Earliest crossing of the current regime's boundaries inside the last
    /// accepted step, located on the continuous extension.
    fn find_event(
        &self,
        stepper: &mut Stepper,
        sys: &mut ExtremalSystem<'_>,
        regime: ThrottleRegime,
        e: f64,
        buf: &mut [f64],
    ) -> Result<Option<(f64, Boundary)>> {
        let c = self.model.spacecraft.c_nd;
        let sc = &self.model.spacecraft;
        let t_a = stepper.t_prev;
        let t_b = stepper.t;
        let h = t_b - t_a;
        let state_a = ExtendedState::from_slice(&stepper.y_prev);
        let state_b = ExtendedState::from_slice(&stepper.y);
        let s_a = switching_function(&state_a, c);
        let s_b = switching_function(&state_b, c);

        // Cheap screen: cubic Hermite model of S through both ends.
        let mut suspect = violation(regime, s_b, e, CROSSING_SLACK).is_some();
        if !suspect {
            let d_a = switching_gradient(&state_a, sc).map(|(_, d)| d).unwrap_or(0.0) * h;
            let d_b = switching_gradient(&state_b, sc).map(|(_, d)| d).unwrap_or(0.0) * h;
            let n = self.settings.event_samples.max(1);
            for q in 1..n {
                let th = q as f64 / n as f64;
                let h00 = 2.0 * th.powi(3) - 3.0 * th * th + 1.0;
                let h10 = th.powi(3) - 2.0 * th * th + th;
                let h01 = -2.0 * th.powi(3) + 3.0 * th * th;
                let h11 = th.powi(3) - th * th;
                let s = h00 * s_a + h10 * d_a + h01 * s_b + h11 * d_b;
                if violation(regime, s, e, CROSSING_SLACK).is_some() {
                    suspect = true;
                    break;
                }
            }
        }
        if !suspect {
            return Ok(None);
        }

        // Scan the continuous extension for the first violated sample.
        let n = self.settings.event_samples.max(1);
        let mut left = (t_a, s_a);
        let mut found = None;
        for q in 1..=n {
            let t = if q == n { t_b } else { t_a + h * q as f64 / n as f64 };
            let s = if q == n {
                s_b
            } else {
                stepper.interpolate(sys, t, buf)?;
                switching_function(&ExtendedState::from_slice(buf), c)
            };
            if let Some(b) = violation(regime, s, e, CROSSING_SLACK) {
                found = Some((left, (t, s), b));
                break;
            }
            left = (t, s);
        }
        let Some(((mut ta, mut ga), (mut tb, mut gb), boundary)) = found else {
            return Ok(None);
        };
        let thr = boundary.threshold();
        ga -= thr;
        gb -= thr;
        if ga * gb > 0.0 {
            // Left end on the boundary to rounding; give it the allowed sign.
            ga = -gb * f64::EPSILON;
        }

        // Illinois false position on the interpolant.
        let tol = self.settings.event_tol * tb.abs().max(1.0);
        let mut side = 0i8;
        for _ in 0..200 {
            if tb - ta <= tol {
                break;
            }
            let mut tm = (ta * gb - tb * ga) / (gb - ga);
            if !(tm > ta && tm < tb) {
                tm = 0.5 * (ta + tb);
            }
            stepper.interpolate(sys, tm, buf)?;
            let gm = switching_function(&ExtendedState::from_slice(buf), c) - thr;
            if gm * gb > 0.0 {
                tb = tm;
                gb = gm;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            } else {
                ta = tm;
                ga = gm;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            }
        }
        let t_e = if ga.abs() <= gb.abs() { ta } else { tb };
        Ok(Some((t_e, boundary)))
    }

    /// Refines a located crossing with Newton steps on direct partial
    /// integrations, leaving `[t_e, y(t_e)...]` in `out`.
    fn polish_event(
        &self,
        stepper: &mut Stepper,
        sys: &mut ExtremalSystem<'_>,
        t_guess: f64,
        boundary: Boundary,
        out: &mut [f64],
    ) -> Result<()> {
        let c = self.model.spacecraft.c_nd;
        let sc = &self.model.spacecraft;
        let thr = boundary.threshold();
        let (lo, hi) = (stepper.t_prev, stepper.t);
        let dim = out.len() - 1;
        let mut y = vec![0.0; dim];
        let mut t = t_guess;
        let mut best = (f64::INFINITY, t, vec![0.0; dim]);
        for _ in 0..6 {
            stepper.partial_step(sys, t, &mut y)?;
            let state = ExtendedState::from_slice(&y);
            let g = switching_function(&state, c) - thr;
            if g.abs() < best.0 {
                best = (g.abs(), t, y.clone());
            }
            if g.abs() <= 1e-15 * thr.abs().max(1.0) {
                break;
            }
            let s_dot = switching_gradient(&state, sc).map(|(_, d)| d).unwrap_or(0.0);
            if s_dot == 0.0 {
                break;
            }
            let t_new = (t - g / s_dot).clamp(lo, hi);
            if (t_new - t).abs() <= 2.0 * f64::EPSILON * t.abs().max(1.0) {
                t = t_new;
                continue;
            }
            t = t_new;
        }
        out[0] = best.1;
        out[1..].copy_from_slice(&best.2);
        Ok(())
    }
}

/// Propagates `y0` over `t_span` under the optimal control at `eps`.
pub fn propagate(
    y0: &ExtendedState,
    t_span: (f64, f64),
    eps: Homotopy,
    model: &Model,
    settings: &IntegratorSettings,
) -> Result<TrajectorySolution> {
    let run = Run { model, eps, settings, with_stm: false, samples: &[] };
    Ok(run.execute(y0, t_span)?.traj)
}

/// As [`propagate`], additionally recording the state at each of the sorted
/// epochs in `sample_times`.
pub fn propagate_sampled(
    y0: &ExtendedState,
    t_span: (f64, f64),
    eps: Homotopy,
    model: &Model,
    settings: &IntegratorSettings,
    sample_times: &[f64],
) -> Result<TrajectorySolution> {
    let run = Run { model, eps, settings, with_stm: false, samples: sample_times };
    Ok(run.execute(y0, t_span)?.traj)
}

/// Propagates the extremal jointly with its state-transition matrix.
pub fn propagate_with_stm(
    y0: &ExtendedState,
    t_span: (f64, f64),
    eps: Homotopy,
    model: &Model,
    settings: &IntegratorSettings,
) -> Result<(TrajectorySolution, StateTransition)> {
    let run = Run { model, eps, settings, with_stm: true, samples: &[] };
    let out = run.execute(y0, t_span)?;
    let phi = StateMatrix::from_column_slice(&out.final_y[STATE_DIM..]);
    Ok((out.traj, StateTransition { phi }))
}
