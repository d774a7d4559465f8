use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use lowthrust_core::propagation::propagate_sampled;
use lowthrust_core::pso::{pso_minimize, ShootingObjective};
use lowthrust_core::scenario::{count_revolutions, parse_published_solutions};
use lowthrust_core::shooting::{continuation_solve, solve_rounded, RoundedStart};
use lowthrust_core::{
    ContinuationSchedule, Homotopy, PsoObjectiveSpec, Scenario, ShootingProblem, SolutionRecord, SwarmConfig,
    TrajectorySolution, TrustRegionSettings, Vector7,
};
use nalgebra::Vector3;

use crate::export::{sample_grid, trajectory_csv};
use crate::manifest::{
    write_json, IntegratorEcho, Outcome, ProgressLog, PsoSummary, RecordOut, RunManifest, SwarmEcho, Timings,
    ValidationEntry, ValidationReport,
};
use crate::{load_scenario, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.json";
pub const PROGRESS_FILE: &str = "progress.log";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const PUBLISHED_FILE: &str = "published_solutions.txt";

/// Dense-output rows written with each exported trajectory.
pub const DEFAULT_SAMPLES: usize = 2000;
/// Restarts inside the rounding box of printed co-states.
pub const DEFAULT_RESTARTS: usize = 1000;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub scenario: Scenario,
    pub swarm: SwarmConfig,
    /// Integration tolerance while the swarm runs.
    pub swarm_tol: f64,
    pub continuation_steps: usize,
    pub samples: usize,
    pub out_dir: PathBuf,
}

impl SolveOptions {
    pub fn new(scenario: Scenario, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario,
            swarm: SwarmConfig::default(),
            swarm_tol: 1e-14,
            continuation_steps: ContinuationSchedule::DEFAULT_STEPS,
            samples: DEFAULT_SAMPLES,
            out_dir: out_dir.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveRun {
    pub outcome: Outcome,
    pub manifest: RunManifest,
}

/// Swarm at `eps = 1`, then continuation to `eps = 0`.
///
/// Writes the manifest, every continuation record, the progress log and the
/// trajectory of the deepest converged step (or of the swarm guess when no
/// step converged) into `out_dir`.
pub fn cmd_solve(opts: &SolveOptions) -> Result<SolveRun, CliError> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let progress_path = dir.join(PROGRESS_FILE);
    let file = File::create(&progress_path).map_err(|e| CliError::io(&progress_path, e))?;
    let mut log = ProgressLog::new(BufWriter::new(file));
    let mut log_error = None;

    let problem = ShootingProblem::new(&opts.scenario, Homotopy::ENERGY);
    let mut swarm_problem = problem.clone();
    swarm_problem.integrator = problem.integrator.with_tolerance(opts.swarm_tol);
    let spec = PsoObjectiveSpec::default();
    let objective = ShootingObjective { problem: &swarm_problem, spec };
    let pso = pso_minimize(&objective, &opts.swarm, |p| {
        if let Err(e) = log.pso(p) {
            log_error.get_or_insert(e);
        }
    })?;
    let pso_s = started.elapsed().as_secs_f64();

    let schedule = ContinuationSchedule::new(opts.continuation_steps)?;
    let records = continuation_solve(
        &Vector7::from(pso.best_position),
        &problem,
        &schedule,
        &TrustRegionSettings::default(),
        |r| {
            if let Err(e) = log.shooting(r) {
                log_error.get_or_insert(e);
            }
        },
    );
    let continuation_s = started.elapsed().as_secs_f64() - pso_s;
    if let Some(e) = log_error {
        return Err(CliError::io(&progress_path, e));
    }
    drop(log);

    let reached_fuel = records.last().is_some_and(|r| r.converged && r.eps == 0.0);
    let outcome = if reached_fuel {
        Outcome::Success
    } else if pso.best_value < spec.infeasible_penalty {
        Outcome::Partial
    } else {
        Outcome::NotConverged
    };

    let mut artifacts = vec![PROGRESS_FILE.to_string(), RECORDS_FILE.to_string()];
    let out_records: Vec<RecordOut> = records.iter().map(RecordOut::from).collect();
    write_json(&dir.join(RECORDS_FILE), &out_records)?;

    let (lam, eps) = match records.iter().rev().find(|r| r.converged) {
        Some(r) => (r.lam0, r.eps),
        None => (pso.best_position, 1.0),
    };
    let eps = Homotopy::new(eps)?;
    let traj = sampled_trajectory(&opts.scenario, &lam, eps, opts.samples)?;
    if traj.halted.is_none() {
        let path = dir.join(TRAJECTORY_FILE);
        std::fs::write(&path, trajectory_csv(&traj, eps, &opts.scenario.spacecraft)).map_err(|e| CliError::io(&path, e))?;
        artifacts.push(TRAJECTORY_FILE.to_string());
    }

    let manifest = RunManifest {
        command: "solve".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_unix_s,
        scenario: opts.scenario.name.clone(),
        scenario_config: opts.scenario.to_config(),
        swarm: SwarmEcho::from(&opts.swarm),
        rng_seeds: vec![opts.swarm.rng_seed],
        integrator: IntegratorEcho::new(&problem.integrator, opts.swarm_tol),
        continuation_steps: opts.continuation_steps,
        timings: Timings { pso_s, continuation_s, total_s: started.elapsed().as_secs_f64() },
        pso: PsoSummary::from(&pso),
        records: out_records,
        outcome,
        exit_code: outcome.code(),
        artifacts,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(SolveRun { outcome, manifest })
}

#[derive(Debug, Clone)]
pub struct ShootOptions {
    pub scenario: Scenario,
    pub costates: [f64; 7],
    /// Half of the last printed digit of each co-state; zero disables the
    /// restarts for that component.
    pub half_ulps: [f64; 7],
    pub eps: f64,
    /// Run the full schedule from `eps = 1` with this many steps.
    pub continue_steps: Option<usize>,
    pub restarts: usize,
    pub out_dir: Option<PathBuf>,
}

impl ShootOptions {
    pub fn new(scenario: Scenario, costates: [f64; 7], half_ulps: [f64; 7], eps: f64) -> Self {
        Self { scenario, costates, half_ulps, eps, continue_steps: None, restarts: DEFAULT_RESTARTS, out_dir: None }
    }
}

#[derive(Debug, Clone)]
pub struct ShootRun {
    pub outcome: Outcome,
    pub records: Vec<RecordOut>,
    /// Solver starts used by the rounded-start fallback.
    pub starts: usize,
    /// The single solve converged inside the leash around the given
    /// co-states. Always false for a continuation.
    pub reproduced: bool,
}

impl ShootRun {
    pub fn last(&self) -> &RecordOut {
        self.records.last().expect("every shoot run records at least one solve")
    }
}

/// Single solve at `eps`, or the whole continuation when `continue_steps`
/// is set. Non-convergence is reported through the outcome; the records
/// are written either way.
pub fn cmd_shoot(opts: &ShootOptions) -> Result<ShootRun, CliError> {
    let guess = Vector7::from(opts.costates);
    let settings = TrustRegionSettings::default();
    let (records, starts, reproduced, target_eps) = match opts.continue_steps {
        Some(n) => {
            let schedule = ContinuationSchedule::new(n)?;
            let problem = ShootingProblem::new(&opts.scenario, Homotopy::ENERGY);
            let records = continuation_solve(&guess, &problem, &schedule, &settings, |_| {});
            let starts = records.len();
            (records, starts, false, 0.0)
        }
        None => {
            let problem = ShootingProblem::new(&opts.scenario, Homotopy::new(opts.eps)?);
            let start = RoundedStart { restarts: opts.restarts, ..RoundedStart::new(Vector7::from(opts.half_ulps)) };
            let run = solve_rounded(&guess, &problem, &settings, &start);
            (vec![run.record], run.starts, run.reproduced, opts.eps)
        }
    };
    let done = records.last().is_some_and(|r: &SolutionRecord| r.converged && r.eps == target_eps);
    let outcome = if done { Outcome::Success } else { Outcome::NotConverged };
    let records: Vec<RecordOut> = records.iter().map(RecordOut::from).collect();
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_json(&dir.join(RECORDS_FILE), &records)?;
    }
    Ok(ShootRun { outcome, records, starts, reproduced })
}

#[derive(Debug, Clone)]
pub struct PropagateOptions {
    pub scenario: Scenario,
    pub costates: [f64; 7],
    pub eps: f64,
    pub samples: usize,
    /// CSV destination.
    pub out: PathBuf,
}

/// Propagates over the full time of flight and writes the trajectory CSV:
/// `samples` equally spaced rows plus one row per switch node.
pub fn cmd_propagate(opts: &PropagateOptions) -> Result<(Outcome, TrajectorySolution), CliError> {
    let eps = Homotopy::new(opts.eps)?;
    let traj = sampled_trajectory(&opts.scenario, &opts.costates, eps, opts.samples)?;
    if let Some(reason) = traj.halted {
        return Err(CliError::Halted(reason));
    }
    if let Some(parent) = opts.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(&opts.out, trajectory_csv(&traj, eps, &opts.scenario.spacecraft)).map_err(|e| CliError::io(&opts.out, e))?;
    Ok((Outcome::Success, traj))
}

fn sampled_trajectory(scenario: &Scenario, costates: &[f64; 7], eps: Homotopy, samples: usize) -> Result<TrajectorySolution, CliError> {
    let problem = ShootingProblem::new(scenario, eps);
    let tf = scenario.tof_tu();
    let grid = sample_grid(0.0, tf, samples);
    let y0 = scenario.initial_state(costates);
    Ok(propagate_sampled(&y0, (0.0, tf), eps, &problem.model, &problem.integrator, &grid)?)
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Directory holding the scenario configs and the solutions table.
    pub data_dir: PathBuf,
    /// Labels to check; all when empty.
    pub labels: Vec<String>,
    pub restarts: usize,
    pub out_dir: Option<PathBuf>,
}

impl ValidateOptions {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self { data_dir: data_dir.into(), labels: Vec::new(), restarts: DEFAULT_RESTARTS, out_dir: None }
    }
}

/// Re-converges each shipped published solution at `eps = 0` from its
/// printed co-states and checks the fuel mass. An entry passes only when the
/// solve converges inside the leash around its printed co-states. Revolution
/// counts are reported but never fail an entry.
pub fn cmd_validate(opts: &ValidateOptions, mut on_entry: impl FnMut(&ValidationEntry)) -> Result<ValidationReport, CliError> {
    let table_path = opts.data_dir.join(PUBLISHED_FILE);
    let text = std::fs::read_to_string(&table_path).map_err(|e| CliError::io(&table_path, e))?;
    let published = parse_published_solutions(&text).map_err(|source| CliError::Parse { path: table_path.clone(), source })?;
    let mut entries = Vec::new();
    for sol in published.iter().filter(|s| opts.labels.is_empty() || opts.labels.contains(&s.label)) {
        let scenario = load_scenario_file(&opts.data_dir, &sol.scenario)?;
        let shoot = ShootOptions {
            restarts: opts.restarts,
            ..ShootOptions::new(scenario.clone(), sol.costates, sol.half_ulps, 0.0)
        };
        let run = cmd_shoot(&shoot)?;
        let record = run.last().clone();
        let revolutions = match sol.revolutions {
            Some(_) if record.converged => {
                let traj = sampled_trajectory(&scenario, &record.lam0, Homotopy::FUEL, 20_000)?;
                Some(count_revolutions(&traj, &Vector3::new(-scenario.constants.mu, 0.0, 0.0)))
            }
            _ => None,
        };
        let pass = run.reproduced && (record.delta_m_kg - sol.delta_m_kg).abs() < sol.tolerance_kg;
        let entry = ValidationEntry {
            label: sol.label.clone(),
            scenario: sol.scenario.clone(),
            expected_delta_m_kg: sol.delta_m_kg,
            tolerance_kg: sol.tolerance_kg,
            record,
            starts: run.starts,
            expected_revolutions: sol.revolutions,
            revolutions,
            pass,
        };
        on_entry(&entry);
        entries.push(entry);
    }
    let outcome = if entries.iter().all(|e| e.pass) { Outcome::Success } else { Outcome::NotConverged };
    let report = ValidationReport { entries, outcome };
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_json(&dir.join(VALIDATION_FILE), &report)?;
    }
    Ok(report)
}

fn load_scenario_file(dir: &Path, name: &str) -> Result<Scenario, CliError> {
    let path = dir.join(format!("{name}.cfg"));
    if !path.is_file() {
        return Err(CliError::Usage(format!("scenario file {} not found", path.display())));
    }
    load_scenario(path.to_str().ok_or_else(|| CliError::Usage(format!("non-UTF-8 path {}", path.display())))?)
}
