//! Non-dimensional CR3BP force model in the synodic frame.
//!
//! The first primary sits at `(-mu, 0, 0)` and the second at `(1 - mu, 0, 0)`.
//! Positions are in length units (LU), velocities in velocity units (VU).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Distances below this are treated as a collision with a point mass.
pub const SINGULARITY_GUARD: f64 = 1e-12;

/// Standard gravity used for the exhaust velocity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Mass parameter and the unit system of a primary pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConstants {
    /// Dimensionless mass parameter of the second primary.
    pub mu: f64,
    /// Time unit, s.
    pub tu: f64,
    /// Length unit, km.
    pub lu: f64,
    /// Velocity unit, km/s.
    pub vu: f64,
    /// Mass unit, kg (the spacecraft's initial mass).
    pub mu_mass: f64,
}

impl SystemConstants {
    /// Earth-Moon constants with the given mass unit.
    pub fn earth_moon(mass_unit_kg: f64) -> Self {
        Self {
            mu: 1.21506038e-2,
            tu: 3.75162997e5,
            lu: 3.844e5,
            vu: 1.02462131,
            mu_mass: mass_unit_kg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(Error::InvalidInput(format!("mass parameter {} outside (0, 0.5)", self.mu)));
        }
        if !(self.tu > 0.0 && self.lu > 0.0 && self.vu > 0.0 && self.mu_mass > 0.0) {
            return Err(Error::InvalidInput("unit scales must be positive".into()));
        }
        if ((self.vu - self.lu / self.tu) / self.vu).abs() >= 1e-6 {
            return Err(Error::InvalidInput(format!(
                "velocity unit {} km/s inconsistent with LU/TU = {} km/s",
                self.vu,
                self.lu / self.tu
            )));
        }
        Ok(())
    }

    /// Acceleration unit in m/s².
    pub fn accel_unit(&self) -> f64 {
        self.lu * 1e3 / (self.tu * self.tu)
    }

    /// Force unit in N: mass unit times acceleration unit.
    pub fn force_unit(&self) -> f64 {
        self.mu_mass * self.accel_unit()
    }

    pub fn days_to_tu(&self, days: f64) -> f64 {
        days * 86_400.0 / self.tu
    }

    /// Location of the first primary in the synodic frame.
    pub fn primary1(&self) -> Vector3<f64> {
        Vector3::new(-self.mu, 0.0, 0.0)
    }

    /// Location of the second primary in the synodic frame.
    pub fn primary2(&self) -> Vector3<f64> {
        Vector3::new(1.0 - self.mu, 0.0, 0.0)
    }
}

/// Propulsion parameters, dimensional and scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacecraftParams {
    /// Initial mass, kg.
    pub m_i: f64,
    /// Maximum thrust, N.
    pub t_max: f64,
    /// Specific impulse, s.
    pub isp: f64,
    /// Standard gravity, m/s².
    pub g0: f64,
    /// Exhaust velocity in VU.
    pub c_nd: f64,
    /// Maximum thrust in units of MU·LU/TU².
    pub t_max_nd: f64,
}

impl SpacecraftParams {
    /// Builds the scaled parameters from dimensional inputs.
    ///
    /// A zero thrust is accepted so ballistic arcs can be flown through the
    /// same machinery; every other field must be strictly positive.
    pub fn new(m_i: f64, t_max: f64, isp: f64, constants: &SystemConstants) -> Result<Self> {
        Self::with_gravity(m_i, t_max, isp, STANDARD_GRAVITY, constants)
    }

    /// As [`SpacecraftParams::new`] with an explicit reference gravity, m/s².
    pub fn with_gravity(m_i: f64, t_max: f64, isp: f64, g0: f64, constants: &SystemConstants) -> Result<Self> {
        if !(m_i > 0.0 && t_max >= 0.0 && isp > 0.0 && g0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "spacecraft parameters must be positive (m_i = {m_i}, t_max = {t_max}, isp = {isp})"
            )));
        }
        let exhaust = isp * g0;
        let c_nd = exhaust / (constants.vu * 1e3);
        let t_max_nd = t_max * constants.tu * constants.tu / (m_i * constants.lu * 1e3);
        Ok(Self { m_i, t_max, isp, g0, c_nd, t_max_nd })
    }

    /// Dimensional exhaust velocity, m/s.
    pub fn exhaust_velocity(&self) -> f64 {
        self.isp * self.g0
    }
}

/// Distances from the spacecraft to the first and second primary.
#[inline]
pub fn primary_distances(r: &Vector3<f64>, mu: f64) -> (f64, f64) {
    let x1 = r.x + mu;
    let x2 = r.x + mu - 1.0;
    let yz = r.y * r.y + r.z * r.z;
    ((x1 * x1 + yz).sqrt(), (x2 * x2 + yz).sqrt())
}

#[inline]
fn guarded_distances(r: &Vector3<f64>, mu: f64) -> Result<(f64, f64)> {
    let (r1, r2) = primary_distances(r, mu);
    if !(r1 >= SINGULARITY_GUARD) {
        return Err(Error::Singularity { primary: 1, distance: r1 });
    }
    if !(r2 >= SINGULARITY_GUARD) {
        return Err(Error::Singularity { primary: 2, distance: r2 });
    }
    Ok((r1, r2))
}

/// Gravitational plus centrifugal acceleration `g(r)`.
pub fn gravity_accel(r: &Vector3<f64>, mu: f64) -> Result<Vector3<f64>> {
    let (r1, r2) = guarded_distances(r, mu)?;
    let k1 = (1.0 - mu) / (r1 * r1 * r1);
    let k2 = mu / (r2 * r2 * r2);
    Ok(Vector3::new(
        r.x - k1 * (r.x + mu) - k2 * (r.x + mu - 1.0),
        r.y - k1 * r.y - k2 * r.y,
        -k1 * r.z - k2 * r.z,
    ))
}

/// Coriolis acceleration `h(v) = (2 vy, -2 vx, 0)`.
#[inline]
pub fn coriolis_term(v: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(2.0 * v.y, -2.0 * v.x, 0.0)
}

/// Jacobian `G = ∂g/∂r`. Symmetric.
pub fn gravity_gradient(r: &Vector3<f64>, mu: f64) -> Result<Matrix3<f64>> {
    let (r1, r2) = guarded_distances(r, mu)?;
    let d1 = Vector3::new(r.x + mu, r.y, r.z);
    let d2 = Vector3::new(r.x + mu - 1.0, r.y, r.z);
    let mut g = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    for (d, rho, k) in [(d1, r1, 1.0 - mu), (d2, r2, mu)] {
        let inv3 = k / (rho * rho * rho);
        let inv5 = 3.0 * k / (rho * rho * rho * rho * rho);
        g += d * d.transpose() * inv5 - Matrix3::identity() * inv3;
    }
    Ok(g)
}

/// Derivative of `G(r)·w` with respect to `r` for a fixed vector `w`.
///
/// Needed by the co-state Jacobian, where `w` is the velocity co-state.
pub fn gravity_gradient_directional(r: &Vector3<f64>, w: &Vector3<f64>, mu: f64) -> Result<Matrix3<f64>> {
    let (r1, r2) = guarded_distances(r, mu)?;
    let d1 = Vector3::new(r.x + mu, r.y, r.z);
    let d2 = Vector3::new(r.x + mu - 1.0, r.y, r.z);
    let mut out = Matrix3::zeros();
    for (d, rho, k) in [(d1, r1, 1.0 - mu), (d2, r2, mu)] {
        let rho2 = rho * rho;
        let inv5 = k / (rho2 * rho2 * rho);
        let inv7 = inv5 / rho2;
        let dw = d.dot(w);
        out += Matrix3::identity() * (3.0 * dw * inv5)
            + (d * w.transpose() + w * d.transpose()) * (3.0 * inv5)
            - d * d.transpose() * (15.0 * dw * inv7);
    }
    Ok(out)
}

/// Jacobian `H = ∂h/∂v`: constant, with `H12 = 2` and `H21 = -2`.
pub fn coriolis_jacobian() -> Matrix3<f64> {
    Matrix3::new(0.0, 2.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0)
}

/// Which collinear libration point to locate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollinearPoint {
    L1,
    L2,
    L3,
}

impl TryFrom<u8> for CollinearPoint {
    type Error = Error;

    fn try_from(index: u8) -> Result<Self> {
        match index {
            1 => Ok(Self::L1),
            2 => Ok(Self::L2),
            3 => Ok(Self::L3),
            _ => Err(Error::InvalidInput(format!("no collinear point L{index}"))),
        }
    }
}

/// x-coordinate of a collinear libration point, by bracketed bisection.
pub fn collinear_equilibrium(mu: f64, point: CollinearPoint) -> Result<f64> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::InvalidInput(format!("mass parameter {mu} outside (0, 0.5)")));
    }
    let gx = |x: f64| {
        let d1 = x + mu;
        let d2 = x + mu - 1.0;
        x - (1.0 - mu) * d1 / d1.abs().powi(3) - mu * d2 / d2.abs().powi(3)
    };
    // Offsets keep the bracket clear of the poles; gx tends to -inf/+inf at
    // the left/right side of each primary.
    let pad = 1e-9;
    let (mut lo, mut hi) = match point {
        CollinearPoint::L1 => (-mu + pad, 1.0 - mu - pad),
        CollinearPoint::L2 => (1.0 - mu + pad, 2.5),
        CollinearPoint::L3 => (-2.5, -mu - pad),
    };
    let (mut flo, fhi) = (gx(lo), gx(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracketing("collinear equilibrium not bracketed"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = gx(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Jacobi integral `C = x² + y² + 2(1-mu)/r1 + 2mu/r2 - |v|²`.
pub fn jacobi_constant(r: &Vector3<f64>, v: &Vector3<f64>, mu: f64) -> Result<f64> {
    let (r1, r2) = guarded_distances(r, mu)?;
    Ok(r.x * r.x + r.y * r.y + 2.0 * (1.0 - mu) / r1 + 2.0 * mu / r2 - v.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: f64 = 1.21506038e-2;

    #[test]
    fn distances_at_primaries() {
        let (r1, r2) = primary_distances(&Vector3::new(-MU, 0.0, 0.0), MU);
        assert_eq!(r1, 0.0);
        assert!((r2 - 1.0).abs() < 1e-15);
        let (r1, r2) = primary_distances(&Vector3::new(1.0 - MU, 0.0, 0.0), MU);
        assert!((r1 - 1.0).abs() < 1e-15);
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn gravity_errors_at_primary() {
        let err = gravity_accel(&Vector3::new(-MU, 0.0, 0.0), MU).unwrap_err();
        assert!(matches!(err, Error::Singularity { primary: 1, .. }));
        let err = gravity_gradient(&Vector3::new(1.0 - MU, 0.0, 0.0), MU).unwrap_err();
        assert!(matches!(err, Error::Singularity { primary: 2, .. }));
    }

    #[test]
    fn planar_position_has_no_vertical_pull() {
        let g = gravity_accel(&Vector3::new(0.3, -0.7, 0.0), MU).unwrap();
        assert_eq!(g.z, 0.0);
    }

    #[test]
    fn coriolis_values() {
        assert_eq!(coriolis_term(&Vector3::zeros()), Vector3::zeros());
        assert_eq!(coriolis_term(&Vector3::new(1.0, 2.0, 3.0)), Vector3::new(4.0, -2.0, 0.0));
        let h = coriolis_jacobian();
        assert_eq!(h.iter().filter(|x| **x != 0.0).count(), 2);
        assert_eq!(h + h.transpose(), Matrix3::zeros());
        let v = Vector3::new(0.3, -1.1, 0.7);
        assert_eq!(h * v, coriolis_term(&v));
    }

    #[test]
    fn gradient_symmetric_with_trace_two() {
        let r = Vector3::new(0.5, 0.2, -0.1);
        let g = gravity_gradient(&r, MU).unwrap();
        assert_eq!(g, g.transpose());
        assert!((g.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn l1_location() {
        let x = collinear_equilibrium(MU, CollinearPoint::L1).unwrap();
        assert!((x - 0.8369).abs() < 1e-4);
        assert!(gravity_accel(&Vector3::new(x, 0.0, 0.0), MU).unwrap().norm() < 1e-12);
        for p in [CollinearPoint::L2, CollinearPoint::L3] {
            let x = collinear_equilibrium(MU, p).unwrap();
            assert!(gravity_accel(&Vector3::new(x, 0.0, 0.0), MU).unwrap().norm() < 1e-12);
        }
        let x2 = collinear_equilibrium(MU, CollinearPoint::L2).unwrap();
        let x3 = collinear_equilibrium(MU, CollinearPoint::L3).unwrap();
        assert!(x2 > 1.0 - MU && x3 < -MU);
    }

    #[test]
    fn l1_tends_to_one_as_mu_vanishes() {
        let x = collinear_equilibrium(1e-10, CollinearPoint::L1).unwrap();
        assert!((x - 1.0).abs() < 1e-3);
        assert!(CollinearPoint::try_from(4).is_err());
    }

    #[test]
    fn scaled_spacecraft_round_trip() {
        let k = SystemConstants::earth_moon(1500.0);
        k.validate().unwrap();
        let sc = SpacecraftParams::new(1500.0, 10.0, 3000.0, &k).unwrap();
        // Dimensional acceleration back from the scaled thrust.
        let accel = sc.t_max_nd * k.accel_unit();
        assert!((accel - 10.0 / 1500.0).abs() < 1e-15);
        assert!((sc.c_nd * k.vu * 1e3 - sc.exhaust_velocity()).abs() < 1e-9);
        assert!((sc.exhaust_velocity() - 3000.0 * 9.81).abs() < 1e-12);
        assert!(SpacecraftParams::new(-1.0, 10.0, 3000.0, &k).is_err());
    }

    #[test]
    fn inconsistent_units_rejected() {
        let mut k = SystemConstants::earth_moon(1000.0);
        k.vu *= 1.001;
        assert!(k.validate().is_err());
        let mut k = SystemConstants::earth_moon(1000.0);
        k.mu = 0.6;
        assert!(k.validate().is_err());
    }
}
