//! Transfer scenarios: boundary data, the unit-tagged config format, and the
//! published reference solutions.
//!
//! A scenario file is flat `key = value unit` text. Blank lines and lines
//! starting with `#` are ignored. Vectors are three whitespace-separated
//! numbers followed by the unit tag.
//!
//! ```text
//! name = scenario1_gto_l1
//! mu = 1.21506038e-2 nd
//! tof = 8.6404 day
//! r_i = -0.0194885115 -0.0160334798 0 LU
//! ```

use std::fmt;

use nalgebra::Vector3;

use crate::control::ExtendedState;
use crate::dynamics::{SpacecraftParams, SystemConstants};
use crate::propagation::{Model, TrajectorySolution};
use crate::shooting::printed_half_ulp;

/// Time of flight as written in the file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeOfFlight {
    Days(f64),
    Tu(f64),
}

/// Boundary data and vehicle for one fixed-time transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub constants: SystemConstants,
    pub spacecraft: SpacecraftParams,
    pub r_i: Vector3<f64>,
    pub v_i: Vector3<f64>,
    pub r_f: Vector3<f64>,
    pub v_f: Vector3<f64>,
    pub tof: TimeOfFlight,
}

impl Scenario {
    /// Time of flight in TU.
    pub fn tof_tu(&self) -> f64 {
        match self.tof {
            TimeOfFlight::Days(d) => self.constants.days_to_tu(d),
            TimeOfFlight::Tu(t) => t,
        }
    }

    pub fn model(&self) -> Model {
        Model { constants: self.constants, spacecraft: self.spacecraft }
    }

    /// Initial extended state for the given co-states `[lam_r, lam_v, lam_m]`.
    pub fn initial_state(&self, costates: &[f64; 7]) -> ExtendedState {
        ExtendedState::initial(self.r_i, self.v_i, costates)
    }

    /// GTO perigee to an L1 halo orbit, 10 N / 3000 s on 1500 kg.
    pub fn gto_to_l1() -> Self {
        let constants = SystemConstants::earth_moon(1500.0);
        let spacecraft = SpacecraftParams::new(1500.0, 10.0, 3000.0, &constants).expect("valid spacecraft");
        Self {
            name: "scenario1_gto_l1".into(),
            constants,
            spacecraft,
            r_i: Vector3::new(-0.0194885115, -0.0160334798, 0.0),
            v_i: Vector3::new(8.9188819237, -4.0817936888, 0.0),
            r_f: Vector3::new(0.8233851820, 0.0, -0.0222775563),
            v_f: Vector3::new(0.0, 0.1341841703, 0.0),
            tof: TimeOfFlight::Days(8.6404),
        }
    }

    /// L2 halo to L1 halo, 1.5 N / 2000 s on 2000 kg.
    pub fn l2_to_l1() -> Self {
        let constants = SystemConstants::earth_moon(2000.0);
        let spacecraft = SpacecraftParams::new(2000.0, 1.5, 2000.0, &constants).expect("valid spacecraft");
        Self {
            name: "scenario2_l2_l1".into(),
            constants,
            spacecraft,
            r_i: Vector3::new(1.1599795702248494, 0.009720428035815552, -0.12401864915284157),
            v_i: Vector3::new(0.008477705130550553, -0.20786307954141953, -0.010841912833115475),
            r_f: Vector3::new(0.8484736688482315, 0.00506488863463682, 0.17343680487577373),
            v_f: Vector3::new(0.005241131023638693, 0.26343491250951045, -0.008541420325316247),
            tof: TimeOfFlight::Days(12.7),
        }
    }

    /// Serializes to the config format with round-trip float formatting.
    pub fn to_config(&self) -> String {
        let k = &self.constants;
        let sc = &self.spacecraft;
        let vec = |v: &Vector3<f64>| format!("{:?} {:?} {:?}", v.x, v.y, v.z);
        let tof = match self.tof {
            TimeOfFlight::Days(d) => format!("{d:?} day"),
            TimeOfFlight::Tu(t) => format!("{t:?} TU"),
        };
        format!(
            "name = {}\nmu = {:?} nd\ntu = {:?} s\nlu = {:?} km\nvu = {:?} km/s\ng0 = {:?} m/s^2\n\
             m_i = {:?} kg\nt_max = {:?} N\nisp = {:?} s\ntof = {}\n\
             r_i = {} LU\nv_i = {} VU\nr_f = {} LU\nv_f = {} VU\n",
            self.name,
            k.mu,
            k.tu,
            k.lu,
            k.vu,
            sc.g0,
            sc.m_i,
            sc.t_max,
            sc.isp,
            tof,
            vec(&self.r_i),
            vec(&self.v_i),
            vec(&self.r_f),
            vec(&self.v_f)
        )
    }

    /// Parses the config format. Every field is required exactly once.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut fields: Vec<(&str, usize, &str)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ParseError::new(n + 1, "", "expected `key = value unit`"));
            };
            let key = key.trim();
            if !FIELDS.contains(&key) {
                return Err(ParseError::new(n + 1, key, "unknown field"));
            }
            if fields.iter().any(|(k, _, _)| *k == key) {
                return Err(ParseError::new(n + 1, key, "duplicate field"));
            }
            fields.push((key, n + 1, value.trim()));
        }
        let get = |key: &'static str| -> Result<(usize, &str), ParseError> {
            fields
                .iter()
                .find(|(k, _, _)| *k == key)
                .map(|(_, n, v)| (*n, *v))
                .ok_or_else(|| ParseError::missing(key))
        };

        let (_, name) = get("name")?;
        if name.is_empty() {
            return Err(ParseError::missing("name"));
        }
        let scalar = |key: &'static str, units: &[&str]| -> Result<(f64, String), ParseError> {
            let (n, v) = get(key)?;
            let parts: Vec<&str> = v.split_whitespace().collect();
            let [num, unit] = parts[..] else {
                return Err(ParseError::new(n, key, "expected a number and a unit tag"));
            };
            if !units.contains(&unit) {
                return Err(ParseError::new(n, key, &format!("unit tag `{unit}` not one of {units:?}")));
            }
            let x: f64 = num.parse().map_err(|_| ParseError::new(n, key, &format!("invalid number `{num}`")))?;
            if !x.is_finite() {
                return Err(ParseError::new(n, key, "value must be finite"));
            }
            Ok((x, unit.to_string()))
        };
        let vector = |key: &'static str, unit: &str| -> Result<Vector3<f64>, ParseError> {
            let (n, v) = get(key)?;
            let parts: Vec<&str> = v.split_whitespace().collect();
            let [x, y, z, tag] = parts[..] else {
                return Err(ParseError::new(n, key, "expected three numbers and a unit tag"));
            };
            if tag != unit {
                return Err(ParseError::new(n, key, &format!("unit tag `{tag}` should be `{unit}`")));
            }
            let mut out = Vector3::<f64>::zeros();
            for (i, s) in [x, y, z].into_iter().enumerate() {
                out[i] = s.parse().map_err(|_| ParseError::new(n, key, &format!("invalid number `{s}`")))?;
            }
            if !out.iter().all(|c| c.is_finite()) {
                return Err(ParseError::new(n, key, "components must be finite"));
            }
            Ok(out)
        };

        let (mass, _) = scalar("m_i", &["kg"])?;
        let constants = SystemConstants {
            mu: scalar("mu", &["nd"])?.0,
            tu: scalar("tu", &["s"])?.0,
            lu: scalar("lu", &["km"])?.0,
            vu: scalar("vu", &["km/s"])?.0,
            mu_mass: mass,
        };
        let vu_line = get("vu")?.0;
        constants.validate().map_err(|e| ParseError::new(vu_line, "vu", &e.to_string()))?;
        let (g0, _) = scalar("g0", &["m/s^2"])?;
        let (t_max, _) = scalar("t_max", &["N"])?;
        let (isp, _) = scalar("isp", &["s"])?;
        let mass_line = get("m_i")?.0;
        let spacecraft = SpacecraftParams::with_gravity(mass, t_max, isp, g0, &constants)
            .map_err(|e| ParseError::new(mass_line, "m_i", &e.to_string()))?;
        let (tof_value, tof_unit) = scalar("tof", &["day", "TU"])?;
        if tof_value <= 0.0 {
            return Err(ParseError::new(get("tof")?.0, "tof", "time of flight must be positive"));
        }
        let tof = if tof_unit == "day" { TimeOfFlight::Days(tof_value) } else { TimeOfFlight::Tu(tof_value) };

        Ok(Self {
            name: name.to_string(),
            constants,
            spacecraft,
            r_i: vector("r_i", "LU")?,
            v_i: vector("v_i", "VU")?,
            r_f: vector("r_f", "LU")?,
            v_f: vector("v_f", "VU")?,
            tof,
        })
    }
}

const FIELDS: [&str; 14] = ["name", "mu", "tu", "lu", "vu", "g0", "m_i", "t_max", "isp", "tof", "r_i", "v_i", "r_f", "v_f"];

/// Config parse failure naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// 1-based line, absent for missing fields.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, field: &str, message: &str) -> Self {
        Self { line: Some(line), field: field.to_string(), message: message.to_string() }
    }

    fn missing(field: &str) -> Self {
        Self { line: None, field: field.to_string(), message: "missing required field".into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}, field `{}`: {}", self.field, self.message),
            None => write!(f, "field `{}`: {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ParseError {}

/// A fuel-optimal solution reported in the literature for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedSolution {
    pub label: String,
    /// Scenario name the co-states belong to.
    pub scenario: String,
    pub costates: [f64; 7],
    /// Half of the last printed digit of each co-state.
    pub half_ulps: [f64; 7],
    pub delta_m_kg: f64,
    /// Allowed deviation of the re-converged fuel mass, kg.
    pub tolerance_kg: f64,
    /// Reported revolutions about the first primary, when given.
    pub revolutions: Option<u32>,
}

/// Parses the solutions table: one record per line,
/// `label scenario l1 .. l7 delta_m_kg tolerance_kg revs`, with `-` for an
/// unknown revolution count.
pub fn parse_published_solutions(text: &str) -> Result<Vec<PublishedSolution>, ParseError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 12 {
            return Err(ParseError::new(n + 1, parts.first().copied().unwrap_or(""), "expected 12 columns"));
        }
        let num = |i: usize| -> Result<f64, ParseError> {
            parts[i].parse().map_err(|_| ParseError::new(n + 1, parts[0], &format!("invalid number `{}`", parts[i])))
        };
        let mut costates = [0.0; 7];
        let mut half_ulps = [0.0; 7];
        for i in 0..7 {
            costates[i] = num(2 + i)?;
            half_ulps[i] = printed_half_ulp(parts[2 + i]).expect("literal already parsed");
        }
        let revolutions = match parts[11] {
            "-" => None,
            s => Some(s.parse().map_err(|_| ParseError::new(n + 1, parts[0], &format!("invalid count `{s}`")))?),
        };
        out.push(PublishedSolution {
            label: parts[0].to_string(),
            scenario: parts[1].to_string(),
            costates,
            half_ulps,
            delta_m_kg: num(9)?,
            tolerance_kg: num(10)?,
            revolutions,
        });
    }
    Ok(out)
}

/// Completed turns of the x-y projected path about `center`: the unwrapped
/// polar angle swept, divided by 2π and floored.
///
/// Nodes and dense-output samples are merged in time order, so the count is
/// only meaningful when the trajectory was sampled finely enough that no
/// half turn falls between consecutive points.
pub fn count_revolutions(trajectory: &TrajectorySolution, center: &Vector3<f64>) -> i64 {
    let mut points: Vec<(f64, Vector3<f64>)> = trajectory.times.iter().zip(&trajectory.states).map(|(t, s)| (*t, s.r)).collect();
    points.extend(trajectory.samples.iter().map(|(t, s)| (*t, s.r)));
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let points: Vec<Vector3<f64>> = points.into_iter().map(|(_, r)| r).collect();
    winding_turns(&points, center)
}

/// Winding of a polyline about `center` in the x-y plane; see
/// [`count_revolutions`].
pub fn winding_turns(points: &[Vector3<f64>], center: &Vector3<f64>) -> i64 {
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for p in points {
        let ang = (p.y - center.y).atan2(p.x - center.x);
        if let Some(a) = prev {
            let mut d = ang - a;
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            total += d;
        }
        prev = Some(ang);
    }
    (total.abs() / std::f64::consts::TAU + 1e-9).floor() as i64
}
