//! Serializable run artifacts: manifests, solution records, validation
//! reports and the progress log.

use std::io::Write;
use std::path::Path;

use lowthrust_core::{IntegratorSettings, PsoResult, SolutionRecord, SwarmConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Process outcome; maps one-to-one onto the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    /// I/O or usage error.
    Failure,
    /// The swarm produced a guess but shooting did not reach the target.
    Partial,
    NotConverged,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::Failure => 1,
            Self::Partial => 2,
            Self::NotConverged => 3,
        }
    }
}

/// Solver result in export form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOut {
    pub lam0: [f64; 7],
    pub eps: f64,
    #[serde(with = "finite")]
    pub residual_inf: f64,
    #[serde(with = "finite")]
    pub delta_m_kg: f64,
    pub n_switches: usize,
    pub converged: bool,
    pub jacobian_rank: usize,
    pub singular_values: [f64; 7],
    pub iterations: usize,
    pub evaluations: usize,
    pub status: String,
}

impl From<&SolutionRecord> for RecordOut {
    fn from(r: &SolutionRecord) -> Self {
        Self {
            lam0: r.lam0,
            eps: r.eps,
            residual_inf: r.residual_inf,
            delta_m_kg: r.delta_m_kg,
            n_switches: r.n_switches,
            converged: r.converged,
            jacobian_rank: r.jacobian_rank,
            singular_values: r.singular_values,
            iterations: r.iterations,
            evaluations: r.evaluations,
            status: r.status.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmEcho {
    pub swarm_size: usize,
    pub init_lower: [f64; 7],
    pub init_upper: [f64; 7],
    pub search_lower: [f64; 7],
    pub search_upper: [f64; 7],
    pub inertia_range: (f64, f64),
    pub self_weight: f64,
    pub social_weight: f64,
    pub min_neighborhood_fraction: f64,
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
    pub max_wall_time_s: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl From<&SwarmConfig> for SwarmEcho {
    fn from(c: &SwarmConfig) -> Self {
        Self {
            swarm_size: c.swarm_size,
            init_lower: c.init_lower,
            init_upper: c.init_upper,
            search_lower: c.search_lower,
            search_upper: c.search_upper,
            inertia_range: c.inertia_range,
            self_weight: c.self_weight,
            social_weight: c.social_weight,
            min_neighborhood_fraction: c.min_neighborhood_fraction,
            stall_iterations: c.stall_iterations,
            stall_tolerance: c.stall_tolerance,
            max_wall_time_s: c.max_wall_time.as_secs_f64(),
            max_iterations: c.max_iterations,
            rng_seed: c.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorEcho {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Tolerance used while the swarm runs.
    pub swarm_tol: f64,
    pub body_radii_lu: [f64; 2],
    pub mass_floor: f64,
}

impl IntegratorEcho {
    pub fn new(settings: &IntegratorSettings, swarm_tol: f64) -> Self {
        Self {
            abs_tol: settings.abs_tol,
            rel_tol: settings.rel_tol,
            swarm_tol,
            body_radii_lu: settings.body_radii,
            mass_floor: settings.mass_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoSummary {
    pub best_position: [f64; 7],
    pub best_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub elapsed_s: f64,
    pub stop_reason: String,
}

impl From<&PsoResult> for PsoSummary {
    fn from(r: &PsoResult) -> Self {
        Self {
            best_position: r.best_position,
            best_value: r.best_value,
            iterations: r.iterations,
            evaluations: r.evaluations,
            elapsed_s: r.elapsed.as_secs_f64(),
            stop_reason: r.stop_reason.as_str().to_string(),
        }
    }
}

/// Wall-clock seconds per pipeline phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub pso_s: f64,
    pub continuation_s: f64,
    pub total_s: f64,
}

/// Everything needed to audit or repeat a `solve` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Unix time at which the run started.
    pub started_unix_s: u64,
    pub scenario: String,
    /// The scenario in config-file form.
    pub scenario_config: String,
    pub swarm: SwarmEcho,
    pub rng_seeds: Vec<u64>,
    pub integrator: IntegratorEcho,
    pub continuation_steps: usize,
    pub timings: Timings,
    pub pso: PsoSummary,
    pub records: Vec<RecordOut>,
    pub outcome: Outcome,
    pub exit_code: i32,
    /// Paths of the files written next to the manifest.
    pub artifacts: Vec<String>,
}

impl RunManifest {
    /// Copy with every clock-dependent field cleared, for comparing runs.
    pub fn without_timestamps(&self) -> Self {
        let mut m = self.clone();
        m.started_unix_s = 0;
        m.timings = Timings::default();
        m.pso.elapsed_s = 0.0;
        m
    }
}

/// One published solution checked by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub label: String,
    pub scenario: String,
    pub expected_delta_m_kg: f64,
    pub tolerance_kg: f64,
    pub record: RecordOut,
    pub starts: usize,
    pub expected_revolutions: Option<u32>,
    /// Winding about the first primary; a soft check only.
    pub revolutions: Option<i64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub outcome: Outcome,
}

/// Non-finite values travel as `null` and come back as NaN.
mod finite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Line-delimited JSON progress records.
pub struct ProgressLog<W: Write> {
    out: W,
}

#[derive(Serialize)]
#[serde(tag = "phase", rename_all = "kebab-case")]
enum ProgressLine<'a> {
    Pso { iteration: usize, best_value: f64, evaluations: usize, elapsed_s: f64 },
    Shooting { eps: f64, converged: bool, residual_inf: f64, delta_m_kg: f64, iterations: usize, status: &'a str },
}

impl<W: Write> ProgressLog<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn pso(&mut self, p: &lowthrust_core::pso::PsoProgress) -> std::io::Result<()> {
        let line = ProgressLine::Pso {
            iteration: p.iteration,
            best_value: p.best_value,
            evaluations: p.evaluations,
            elapsed_s: p.elapsed.as_secs_f64(),
        };
        self.emit(&line)
    }

    pub fn shooting(&mut self, r: &SolutionRecord) -> std::io::Result<()> {
        let line = ProgressLine::Shooting {
            eps: r.eps,
            converged: r.converged,
            residual_inf: r.residual_inf,
            delta_m_kg: r.delta_m_kg,
            iterations: r.iterations,
            status: r.status.as_str(),
        };
        self.emit(&line)
    }

    fn emit(&mut self, line: &ProgressLine<'_>) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
