//! Pontryagin extremal: switching function, homotopy throttle law, and the
//! coupled state/co-state dynamics with their Jacobian.
//!
//! The extended state is laid out as
//! `[r(0..3), v(3..6), m(6), lam_r(7..10), lam_v(10..13), lam_m(13)]`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::dynamics::{
    coriolis_jacobian, coriolis_term, gravity_accel, gravity_gradient, gravity_gradient_directional,
    SpacecraftParams, SystemConstants,
};
use crate::error::{Error, Result};

pub const STATE_DIM: usize = 14;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Below this norm of `lam_v` the thrust direction is undefined.
pub const PRIMER_THRESHOLD: f64 = 1e-12;

/// Below this magnitude of dS/dt a crossing is considered tangential.
pub const GRAZING_TOLERANCE: f64 = 1e-10;

/// Index layout of the extended state.
pub mod idx {
    pub const R: usize = 0;
    pub const V: usize = 3;
    pub const M: usize = 6;
    pub const LAM_R: usize = 7;
    pub const LAM_V: usize = 10;
    pub const LAM_M: usize = 13;
}

/// Physical state together with its co-states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
    pub m: f64,
    pub lam_r: Vector3<f64>,
    pub lam_v: Vector3<f64>,
    pub lam_m: f64,
}

impl ExtendedState {
    /// Initial extended state with unit mass and the given co-states.
    pub fn initial(r: Vector3<f64>, v: Vector3<f64>, costates: &[f64; 7]) -> Self {
        Self {
            r,
            v,
            m: 1.0,
            lam_r: Vector3::new(costates[0], costates[1], costates[2]),
            lam_v: Vector3::new(costates[3], costates[4], costates[5]),
            lam_m: costates[6],
        }
    }

    pub fn from_vector(y: &StateVector) -> Self {
        Self {
            r: y.fixed_rows::<3>(idx::R).into(),
            v: y.fixed_rows::<3>(idx::V).into(),
            m: y[idx::M],
            lam_r: y.fixed_rows::<3>(idx::LAM_R).into(),
            lam_v: y.fixed_rows::<3>(idx::LAM_V).into(),
            lam_m: y[idx::LAM_M],
        }
    }

    /// Reads the leading fourteen entries of `y`.
    pub fn from_slice(y: &[f64]) -> Self {
        Self {
            r: Vector3::new(y[0], y[1], y[2]),
            v: Vector3::new(y[3], y[4], y[5]),
            m: y[6],
            lam_r: Vector3::new(y[7], y[8], y[9]),
            lam_v: Vector3::new(y[10], y[11], y[12]),
            lam_m: y[13],
        }
    }

    pub fn write_to(&self, y: &mut [f64]) {
        y[..STATE_DIM].copy_from_slice(self.to_vector().as_slice());
    }

    pub fn to_vector(&self) -> StateVector {
        let mut y = StateVector::zeros();
        y.fixed_rows_mut::<3>(idx::R).copy_from(&self.r);
        y.fixed_rows_mut::<3>(idx::V).copy_from(&self.v);
        y[idx::M] = self.m;
        y.fixed_rows_mut::<3>(idx::LAM_R).copy_from(&self.lam_r);
        y.fixed_rows_mut::<3>(idx::LAM_V).copy_from(&self.lam_v);
        y[idx::LAM_M] = self.lam_m;
        y
    }

    pub fn costates(&self) -> [f64; 7] {
        [
            self.lam_r.x,
            self.lam_r.y,
            self.lam_r.z,
            self.lam_v.x,
            self.lam_v.y,
            self.lam_v.z,
            self.lam_m,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Energy-to-fuel homotopy parameter, `0 <= eps <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Homotopy(f64);

impl Homotopy {
    pub const ENERGY: Homotopy = Homotopy(1.0);
    pub const FUEL: Homotopy = Homotopy(0.0);

    pub fn new(eps: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&eps) {
            Ok(Self(eps))
        } else {
            Err(Error::InvalidInput(format!("homotopy parameter {eps} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Throttle regime selected by the switching function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThrottleRegime {
    /// `u = 0`.
    Coast,
    /// `u = (eps - S) / (2 eps)`; only exists for `eps > 0`.
    Intermediate,
    /// `u = 1`.
    FullThrust,
}

impl ThrottleRegime {
    /// Regime selected by the throttle law. Boundary values `|S| = eps` belong
    /// to the intermediate branch; for `eps = 0` the tie `S = 0` coasts.
    pub fn classify(s: f64, eps: Homotopy) -> Self {
        let e = eps.value();
        if e > 0.0 {
            if s > e {
                Self::Coast
            } else if s < -e {
                Self::FullThrust
            } else {
                Self::Intermediate
            }
        } else if s < 0.0 {
            Self::FullThrust
        } else {
            Self::Coast
        }
    }

    /// Throttle of this regime's branch, evaluated without clamping so the
    /// branch extends smoothly a little past its boundaries.
    pub fn throttle(self, s: f64, eps: Homotopy) -> f64 {
        match self {
            Self::Coast => 0.0,
            Self::FullThrust => 1.0,
            Self::Intermediate => {
                let e = eps.value();
                (e - s) / (2.0 * e)
            }
        }
    }
}

/// Switching function `S = 1 - lam_m - (c/m)|lam_v|`.
#[inline]
pub fn switching_function(state: &ExtendedState, c_nd: f64) -> f64 {
    -(c_nd / state.m) * state.lam_v.norm() - state.lam_m + 1.0
}

/// Optimal throttle in `[0, 1]` for switching value `s`.
pub fn optimal_throttle(s: f64, eps: Homotopy) -> f64 {
    ThrottleRegime::classify(s, eps).throttle(s, eps).clamp(0.0, 1.0)
}

/// Optimal thrust direction `-lam_v / |lam_v|`.
pub fn primer_direction(lam_v: &Vector3<f64>) -> Result<Vector3<f64>> {
    let n = lam_v.norm();
    if !(n > PRIMER_THRESHOLD) {
        return Err(Error::DegeneratePrimer(n));
    }
    Ok(-lam_v / n)
}

/// Control and Hamiltonian at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlEvaluation {
    pub s: f64,
    pub u: f64,
    /// Thrust direction; `None` when `|lam_v|` is below the primer threshold.
    pub alpha: Option<Vector3<f64>>,
    pub h_val: f64,
}

pub fn evaluate_control(
    state: &ExtendedState,
    eps: Homotopy,
    sc: &SpacecraftParams,
    constants: &SystemConstants,
) -> Result<ControlEvaluation> {
    let s = switching_function(state, sc.c_nd);
    let u = optimal_throttle(s, eps);
    let alpha = primer_direction(&state.lam_v).ok();
    let h_val = hamiltonian(state, eps, sc, constants)?;
    Ok(ControlEvaluation { s, u, alpha, h_val })
}

/// Hamiltonian after substituting the optimal direction and throttle.
pub fn hamiltonian(
    state: &ExtendedState,
    eps: Homotopy,
    sc: &SpacecraftParams,
    constants: &SystemConstants,
) -> Result<f64> {
    let s = switching_function(state, sc.c_nd);
    let u = optimal_throttle(s, eps);
    let g = gravity_accel(&state.r, constants.mu)?;
    let h = coriolis_term(&state.v);
    let e = eps.value();
    Ok(state.lam_r.dot(&state.v)
        + state.lam_v.dot(&(g + h))
        + u * sc.t_max_nd / sc.c_nd * (s - e + e * u))
}

/// Right-hand side of the extremal ODE under the optimal throttle law.
pub fn extremal_rhs(
    _t: f64,
    state: &ExtendedState,
    eps: Homotopy,
    sc: &SpacecraftParams,
    constants: &SystemConstants,
) -> Result<StateVector> {
    let s = switching_function(state, sc.c_nd);
    let regime = ThrottleRegime::classify(s, eps);
    regime_rhs(state, regime, eps, sc, constants)
}

/// Right-hand side with the throttle branch pinned to `regime`.
pub fn regime_rhs(
    state: &ExtendedState,
    regime: ThrottleRegime,
    eps: Homotopy,
    sc: &SpacecraftParams,
    constants: &SystemConstants,
) -> Result<StateVector> {
    let mu = constants.mu;
    let s = switching_function(state, sc.c_nd);
    let u = regime.throttle(s, eps);
    let g = gravity_accel(&state.r, mu)?;
    let grad = gravity_gradient(&state.r, mu)?;
    let hmat = coriolis_jacobian();

    let mut acc = g + coriolis_term(&state.v);
    let mut mdot = 0.0;
    let mut lam_m_dot = 0.0;
    if u != 0.0 {
        let alpha = primer_direction(&state.lam_v)?;
        let lv = state.lam_v.norm();
        acc += alpha * (u * sc.t_max_nd / state.m);
        mdot = -u * sc.t_max_nd / sc.c_nd;
        lam_m_dot = -lv * u * sc.t_max_nd / (state.m * state.m);
    }

    let mut dy = StateVector::zeros();
    dy.fixed_rows_mut::<3>(idx::R).copy_from(&state.v);
    dy.fixed_rows_mut::<3>(idx::V).copy_from(&acc);
    dy[idx::M] = mdot;
    dy.fixed_rows_mut::<3>(idx::LAM_R)
        .copy_from(&(-grad.transpose() * state.lam_v));
    dy.fixed_rows_mut::<3>(idx::LAM_V)
        .copy_from(&(-state.lam_r - hmat.transpose() * state.lam_v));
    dy[idx::LAM_M] = lam_m_dot;
    Ok(dy)
}

/// `∂ẏ/∂y` for the regime selected by the throttle law.
///
/// Fails with [`Error::OnSwitchSurface`] exactly on a regime boundary, where
/// the Jacobian is discontinuous.
pub fn rhs_jacobian(
    _t: f64,
    state: &ExtendedState,
    eps: Homotopy,
    sc: &SpacecraftParams,
    constants: &SystemConstants,
) -> Result<StateMatrix> {
    let s = switching_function(state, sc.c_nd);
    let e = eps.value();
    if s.abs() == e {
        return Err(Error::OnSwitchSurface(s));
    }
    regime_jacobian(state, ThrottleRegime::classify(s, eps), eps, sc, constants)
}

/// `∂ẏ/∂y` with the throttle branch pinned to `regime`.
pub fn regime_jacobian(
    state: &ExtendedState,
    regime: ThrottleRegime,
    eps: Homotopy,
    sc: &SpacecraftParams,
    constants: &SystemConstants,
) -> Result<StateMatrix> {
    let mu = constants.mu;
    let tmax = sc.t_max_nd;
    let c = sc.c_nd;
    let m = state.m;
    let grad = gravity_gradient(&state.r, mu)?;
    let hmat = coriolis_jacobian();
    let s = switching_function(state, c);
    let u = regime.throttle(s, eps);

    let mut f = StateMatrix::zeros();
    f.fixed_view_mut::<3, 3>(idx::R, idx::V).copy_from(&Matrix3::identity());
    f.fixed_view_mut::<3, 3>(idx::V, idx::R).copy_from(&grad);
    f.fixed_view_mut::<3, 3>(idx::V, idx::V).copy_from(&hmat);
    let dgl = gravity_gradient_directional(&state.r, &state.lam_v, mu)?;
    f.fixed_view_mut::<3, 3>(idx::LAM_R, idx::R).copy_from(&(-dgl));
    f.fixed_view_mut::<3, 3>(idx::LAM_R, idx::LAM_V)
        .copy_from(&(-grad.transpose()));
    f.fixed_view_mut::<3, 3>(idx::LAM_V, idx::LAM_R)
        .copy_from(&(-Matrix3::identity()));
    f.fixed_view_mut::<3, 3>(idx::LAM_V, idx::LAM_V)
        .copy_from(&(-hmat.transpose()));

    let thrusting = u != 0.0 || regime == ThrottleRegime::Intermediate;
    if !thrusting {
        return Ok(f);
    }

    let lv = state.lam_v.norm();
    if !(lv > PRIMER_THRESHOLD) {
        return Err(Error::DegeneratePrimer(lv));
    }
    let nhat = state.lam_v / lv;
    let proj = Matrix3::identity() - nhat * nhat.transpose();

    // Terms at fixed u.
    let acc_m = nhat * (u * tmax / (m * m));
    f.fixed_view_mut::<3, 1>(idx::V, idx::M).copy_from(&acc_m);
    f.fixed_view_mut::<3, 3>(idx::V, idx::LAM_V)
        .copy_from(&(-proj * (u * tmax / (m * lv))));
    f[(idx::LAM_M, idx::M)] = 2.0 * lv * u * tmax / (m * m * m);
    let dlm_dlv = -nhat.transpose() * (u * tmax / (m * m));
    f.fixed_view_mut::<1, 3>(idx::LAM_M, idx::LAM_V).copy_from(&dlm_dlv);

    // Throttle sensitivity in the intermediate branch: du/dy = -(1/2eps) dS/dy.
    if regime == ThrottleRegime::Intermediate {
        let (ds, _) = switching_gradient(state, sc)?;
        let du = ds.transpose() * (-1.0 / (2.0 * eps.value()));
        let dacc_du = -nhat * (tmax / m);
        let dmdot_du = -tmax / c;
        let dlm_du = -lv * tmax / (m * m);
        for j in 0..STATE_DIM {
            for i in 0..3 {
                f[(idx::V + i, j)] += dacc_du[i] * du[j];
            }
            f[(idx::M, j)] += dmdot_du * du[j];
            f[(idx::LAM_M, j)] += dlm_du * du[j];
        }
    }
    Ok(f)
}

/// Gradient of the switching function and its time derivative.
///
/// The time derivative does not depend on the throttle: the mass and mass
/// co-state contributions cancel.
pub fn switching_gradient(state: &ExtendedState, sc: &SpacecraftParams) -> Result<(StateVector, f64)> {
    let lv = state.lam_v.norm();
    if !(lv > 0.0) {
        return Err(Error::DegeneratePrimer(lv));
    }
    let c = sc.c_nd;
    let m = state.m;
    let nhat = state.lam_v / lv;
    let mut ds = StateVector::zeros();
    ds[idx::M] = c / (m * m) * lv;
    ds.fixed_rows_mut::<3>(idx::LAM_V).copy_from(&(-nhat * (c / m)));
    ds[idx::LAM_M] = -1.0;
    let s_dot = (c / m) * (state.lam_r + coriolis_jacobian().transpose() * state.lam_v).dot(&nhat);
    Ok((ds, s_dot))
}

/// State-transition correction across a switch:
/// `Psi = I + (ydot_after - ydot_before) (dS/dy) / Sdot`.
pub fn jump_matrix(
    state: &ExtendedState,
    rate_before: &StateVector,
    rate_after: &StateVector,
    sc: &SpacecraftParams,
) -> Result<StateMatrix> {
    let (ds, s_dot) = switching_gradient(state, sc)?;
    if s_dot.abs() < GRAZING_TOLERANCE {
        return Err(Error::GrazingSwitch(s_dot.abs()));
    }
    Ok(StateMatrix::identity() + (rate_after - rate_before) * ds.transpose() / s_dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SystemConstants, SpacecraftParams) {
        let k = SystemConstants::earth_moon(1500.0);
        let sc = SpacecraftParams::new(1500.0, 10.0, 3000.0, &k).unwrap();
        (k, sc)
    }

    fn sample_state() -> ExtendedState {
        ExtendedState {
            r: Vector3::new(0.4, 0.3, 0.05),
            v: Vector3::new(-0.2, 0.5, 0.01),
            m: 0.93,
            lam_r: Vector3::new(1.2, -0.4, 0.3),
            lam_v: Vector3::new(0.02, -0.015, 0.004),
            lam_m: 0.11,
        }
    }

    #[test]
    fn switching_function_values() {
        let mut st = sample_state();
        st.lam_v = Vector3::zeros();
        st.lam_m = 0.0;
        assert_eq!(switching_function(&st, 28.0), 1.0);
        st.m = 1.0;
        st.lam_v = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(switching_function(&st, 1.0), 0.0);
    }

    #[test]
    fn throttle_branches() {
        let one = Homotopy::new(1.0).unwrap();
        let half = Homotopy::new(0.5).unwrap();
        assert_eq!(optimal_throttle(2.0, one), 0.0);
        assert_eq!(optimal_throttle(0.0, one), 0.5);
        assert_eq!(optimal_throttle(-0.5, half), 1.0);
        assert_eq!(optimal_throttle(0.5, half), 0.0);
        assert_eq!(optimal_throttle(-1e-3, Homotopy::FUEL), 1.0);
        assert_eq!(optimal_throttle(1e-3, Homotopy::FUEL), 0.0);
        assert_eq!(optimal_throttle(0.0, Homotopy::FUEL), 0.0);
        assert!(Homotopy::new(1.5).is_err());
        assert!(Homotopy::new(-0.1).is_err());
    }

    #[test]
    fn primer_cases() {
        let a = primer_direction(&Vector3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(a, Vector3::new(0.0, 0.0, -1.0));
        let a = primer_direction(&Vector3::new(0.3, -7.0, 1e-3)).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-14);
        assert!(matches!(
            primer_direction(&Vector3::new(1e-20, 0.0, 0.0)),
            Err(Error::DegeneratePrimer(_))
        ));
    }

    #[test]
    fn zero_costates_give_zero_hamiltonian() {
        let (k, sc) = setup();
        let mut st = sample_state();
        st.lam_r = Vector3::zeros();
        st.lam_v = Vector3::zeros();
        st.lam_m = 0.0;
        let eps = Homotopy::new(0.5).unwrap();
        let ctl = evaluate_control(&st, eps, &sc, &k).unwrap();
        assert_eq!(ctl.s, 1.0);
        assert_eq!(ctl.u, 0.0);
        assert_eq!(ctl.h_val, 0.0);
        assert!(ctl.alpha.is_none());
    }

    #[test]
    fn coast_rates_leave_mass_alone() {
        let (k, sc) = setup();
        let mut st = sample_state();
        st.lam_v = Vector3::new(1e-4, 0.0, 0.0);
        st.lam_m = 0.0;
        let dy = extremal_rhs(0.0, &st, Homotopy::FUEL, &sc, &k).unwrap();
        assert_eq!(dy[idx::M], 0.0);
        assert_eq!(dy[idx::LAM_M], 0.0);
    }

    #[test]
    fn thrust_rates_signs() {
        let (k, sc) = setup();
        let mut st = sample_state();
        st.lam_v *= 2.0;
        let s = switching_function(&st, sc.c_nd);
        assert!(s < 0.0);
        let dy = extremal_rhs(0.0, &st, Homotopy::FUEL, &sc, &k).unwrap();
        assert!((dy[idx::M] + sc.t_max_nd / sc.c_nd).abs() < 1e-15);
        let expect = -st.lam_v.norm() * sc.t_max_nd / (st.m * st.m);
        assert!((dy[idx::LAM_M] - expect).abs() < 1e-15);
    }

    #[test]
    fn coast_jacobian_structure() {
        let (k, sc) = setup();
        let mut st = sample_state();
        st.lam_v *= 1e-3;
        let f = rhs_jacobian(0.0, &st, Homotopy::FUEL, &sc, &k).unwrap();
        let g = gravity_gradient(&st.r, k.mu).unwrap();
        assert_eq!(f.fixed_view::<3, 3>(idx::R, idx::V).clone_owned(), Matrix3::identity());
        assert_eq!(f.fixed_view::<3, 3>(idx::LAM_R, idx::LAM_V).clone_owned(), -g.transpose());
        assert!(f.row(idx::M).iter().all(|x| *x == 0.0));
        assert!(f.row(idx::LAM_M).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn jacobian_refuses_switch_surface() {
        let (k, sc) = setup();
        let mut st = sample_state();
        st.lam_m = 0.0;
        st.m = 1.0;
        st.lam_v = Vector3::new(0.0, 1.0 / sc.c_nd, 0.0);
        // S = 1 - |lam_v| c = 0 up to rounding; force it exactly.
        let s = switching_function(&st, sc.c_nd);
        st.lam_m = s;
        assert_eq!(switching_function(&st, sc.c_nd), 0.0);
        assert!(matches!(
            rhs_jacobian(0.0, &st, Homotopy::FUEL, &sc, &k),
            Err(Error::OnSwitchSurface(_))
        ));
    }

    #[test]
    fn sdot_has_no_vertical_coriolis_coupling() {
        let (_, sc) = setup();
        let mut st = sample_state();
        st.m = 1.0;
        st.lam_r = Vector3::zeros();
        st.lam_v = Vector3::new(0.0, 0.0, 1.0);
        let sc1 = SpacecraftParams { c_nd: 1.0, ..sc };
        let (_, s_dot) = switching_gradient(&st, &sc1).unwrap();
        assert_eq!(s_dot, 0.0);
    }

    #[test]
    fn continuous_rates_give_identity_jump() {
        let (_, sc) = setup();
        let st = sample_state();
        let rate = StateVector::from_element(0.3);
        let psi = jump_matrix(&st, &rate, &rate, &sc).unwrap();
        assert_eq!(psi, StateMatrix::identity());
    }

    #[test]
    fn bang_bang_jump_keeps_position_rows() {
        let (k, sc) = setup();
        let st = sample_state();
        let eps = Homotopy::FUEL;
        let before = regime_rhs(&st, ThrottleRegime::Coast, eps, &sc, &k).unwrap();
        let after = regime_rhs(&st, ThrottleRegime::FullThrust, eps, &sc, &k).unwrap();
        let psi = jump_matrix(&st, &before, &after, &sc).unwrap();
        for i in 0..3 {
            for j in 0..STATE_DIM {
                assert_eq!(psi[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn grazing_switch_detected() {
        let (k, sc) = setup();
        let mut st = sample_state();
        st.lam_r = Vector3::zeros();
        st.lam_v = Vector3::new(0.0, 0.0, 0.1);
        let eps = Homotopy::FUEL;
        let a = regime_rhs(&st, ThrottleRegime::Coast, eps, &sc, &k).unwrap();
        let b = regime_rhs(&st, ThrottleRegime::FullThrust, eps, &sc, &k).unwrap();
        assert!(matches!(jump_matrix(&st, &a, &b, &sc), Err(Error::GrazingSwitch(_))));
    }
}
