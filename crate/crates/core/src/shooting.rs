//! Single shooting on the initial co-states and the energy-to-fuel
//! continuation driver.

use nalgebra::{SMatrix, SVector, Vector3};

use crate::control::{ExtendedState, Homotopy, STATE_DIM};
use crate::error::{Error, Result};
use crate::propagation::{propagate, propagate_with_stm, IntegratorSettings, Model, TrajectorySolution};
use crate::scenario::Scenario;

pub type Vector7 = SVector<f64, 7>;
pub type Matrix7 = SMatrix<f64, 7, 7>;

/// Rows of the extended state constrained at the final time.
const RESIDUAL_ROWS: [usize; 7] = [0, 1, 2, 3, 4, 5, STATE_DIM - 1];
/// Columns of the extended state free at the initial time.
const COSTATE_COLS: [usize; 7] = [7, 8, 9, 10, 11, 12, 13];

/// Fixed-time rendezvous at one value of the homotopy parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingProblem {
    pub model: Model,
    pub eps: Homotopy,
    pub r_i: Vector3<f64>,
    pub v_i: Vector3<f64>,
    pub r_f: Vector3<f64>,
    pub v_f: Vector3<f64>,
    /// Time of flight, TU.
    pub tof: f64,
    pub integrator: IntegratorSettings,
}

impl ShootingProblem {
    pub fn new(scenario: &Scenario, eps: Homotopy) -> Self {
        Self {
            model: scenario.model(),
            eps,
            r_i: scenario.r_i,
            v_i: scenario.v_i,
            r_f: scenario.r_f,
            v_f: scenario.v_f,
            tof: scenario.tof_tu(),
            integrator: IntegratorSettings::new(&scenario.constants),
        }
    }

    pub fn with_eps(&self, eps: Homotopy) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn initial_state(&self, lam0: &Vector7) -> ExtendedState {
        let lam: [f64; 7] = (*lam0).into();
        ExtendedState::initial(self.r_i, self.v_i, &lam)
    }

    /// Final-time residual `[r - r_f, v - v_f, lam_m]` of a terminal state.
    pub fn residual_of(&self, terminal: &ExtendedState) -> Vector7 {
        let dr = terminal.r - self.r_f;
        let dv = terminal.v - self.v_f;
        Vector7::from([dr.x, dr.y, dr.z, dv.x, dv.y, dv.z, terminal.lam_m])
    }

    /// Fuel used by a trajectory, kg.
    pub fn delta_m_kg(&self, terminal: &ExtendedState) -> f64 {
        (1.0 - terminal.m) * self.model.spacecraft.m_i
    }
}

/// Residual and trajectory for one set of initial co-states.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingEvaluation {
    pub residual: Vector7,
    pub jacobian: Option<Matrix7>,
    pub trajectory: TrajectorySolution,
}

fn halted_check(traj: &TrajectorySolution) -> Result<()> {
    match traj.halted {
        Some(reason) => Err(Error::HaltedTrajectory(reason)),
        None => Ok(()),
    }
}

/// Propagates from `lam0` and returns the boundary residual, with the
/// shooting Jacobian when `with_jacobian` is set.
pub fn evaluate(lam0: &Vector7, problem: &ShootingProblem, with_jacobian: bool) -> Result<ShootingEvaluation> {
    if !lam0.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("initial co-states must be finite".into()));
    }
    let y0 = problem.initial_state(lam0);
    let span = (0.0, problem.tof);
    if with_jacobian {
        let (traj, stm) = propagate_with_stm(&y0, span, problem.eps, &problem.model, &problem.integrator)?;
        halted_check(&traj)?;
        let jac = Matrix7::from_fn(|i, j| stm.phi[(RESIDUAL_ROWS[i], COSTATE_COLS[j])]);
        Ok(ShootingEvaluation { residual: problem.residual_of(&traj.terminal_state), jacobian: Some(jac), trajectory: traj })
    } else {
        let traj = propagate(&y0, span, problem.eps, &problem.model, &problem.integrator)?;
        halted_check(&traj)?;
        Ok(ShootingEvaluation { residual: problem.residual_of(&traj.terminal_state), jacobian: None, trajectory: traj })
    }
}

/// Final-boundary residual `Z(lam0)`; a halted propagation is an error.
pub fn shooting_function(lam0: &Vector7, problem: &ShootingProblem) -> Result<Vector7> {
    Ok(evaluate(lam0, problem, false)?.residual)
}

/// `dZ/dlam0` read off the state-transition matrix.
pub fn shooting_jacobian(lam0: &Vector7, problem: &ShootingProblem) -> Result<Matrix7> {
    Ok(evaluate(lam0, problem, true)?.jacobian.expect("requested"))
}

/// Numerical rank: singular values above `tol_factor * sigma_max`.
pub fn numerical_rank(jac: &Matrix7, tol_factor: f64) -> (usize, [f64; 7]) {
    let mut sv: [f64; 7] = jac.singular_values().into();
    sv.sort_by(|a, b| b.total_cmp(a));
    let threshold = tol_factor * sv[0];
    let rank = if sv[0] == 0.0 { 0 } else { sv.iter().filter(|s| **s > threshold).count() };
    (rank, sv)
}

/// Rank and singular values (descending) of the shooting Jacobian at `lam0`.
pub fn jacobian_rank_report(lam0: &Vector7, problem: &ShootingProblem, svd_tol_factor: f64) -> Result<(usize, [f64; 7])> {
    Ok(numerical_rank(&shooting_jacobian(lam0, problem)?, svd_tol_factor))
}

/// Stopping rules and internals of the dogleg solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionSettings {
    /// Convergence threshold on the infinity norm of the residual.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Initial radius as a multiple of the scaled initial guess norm.
    pub initial_radius: f64,
    /// Radius, relative to the scaled iterate norm, below which the solver stalls.
    pub min_radius: f64,
    /// Condition number above which the Newton step uses a truncated SVD.
    /// The default is infinite: plain LU, with the pseudo-inverse only for an
    /// exactly singular Jacobian.
    pub max_condition: f64,
    /// Relative singular value threshold for the reported rank.
    pub rank_tol: f64,
    /// A solve that ends above `residual_tol` but below this residual is
    /// finished by stepping single co-states a few ulps at a time. Zero
    /// disables the polish.
    pub polish_below: f64,
}

impl Default for TrustRegionSettings {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iterations: 250,
            initial_radius: 100.0,
            min_radius: 1e-15,
            max_condition: f64::INFINITY,
            rank_tol: 1e-9,
            polish_below: 1e-8,
        }
    }
}

/// Why the solver returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Trust radius collapsed without reaching the tolerance.
    Stalled,
    MaxIterations,
    /// The initial guess could not be propagated.
    InitialFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::Stalled => "stalled",
            Self::MaxIterations => "max-iterations",
            Self::InitialFailure => "initial-failure",
        }
    }
}

/// Outcome of one shooting solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRecord {
    pub lam0: [f64; 7],
    pub eps: f64,
    pub residual_inf: f64,
    pub delta_m_kg: f64,
    pub n_switches: usize,
    pub converged: bool,
    pub jacobian_rank: usize,
    pub singular_values: [f64; 7],
    pub iterations: usize,
    pub evaluations: usize,
    pub status: SolveStatus,
}

/// Newton step `-J^+ f`, using a truncated pseudo-inverse when `J` is
/// ill-conditioned or singular.
fn newton_step(jac: &Matrix7, f: &Vector7, max_condition: f64) -> Vector7 {
    let svd = jac.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax / smin <= max_condition {
        if let Some(x) = jac.lu().solve(f) {
            if x.iter().all(|v| v.is_finite()) {
                return -x;
            }
        }
    }
    let cutoff = smax / max_condition;
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut step = Vector7::zeros();
    for k in 0..7 {
        let s = svd.singular_values[k];
        if s > cutoff {
            let coef = u.column(k).dot(f) / s;
            step -= vt.row(k).transpose() * coef;
        }
    }
    step
}

/// Dogleg step inside the scaled ball `||D p|| <= delta`.
fn dogleg(jac: &Matrix7, f: &Vector7, diag: &Vector7, delta: f64, p_gn: &Vector7) -> Vector7 {
    let scaled_norm = |p: &Vector7| p.component_mul(diag).norm();
    if scaled_norm(p_gn) <= delta {
        return *p_gn;
    }
    // Steepest descent in scaled variables.
    let g = -(jac.transpose() * f).component_div(diag);
    let g_norm = g.norm();
    if g_norm == 0.0 {
        return p_gn * (delta / scaled_norm(p_gn));
    }
    let g_unscaled = g.component_div(diag);
    let jg = jac * g_unscaled;
    let jg2 = jg.norm_squared();
    let t_cauchy = if jg2 > 0.0 { g_norm * g_norm / jg2 } else { f64::INFINITY };
    let p_sd = g_unscaled * t_cauchy;
    let sd_norm = scaled_norm(&p_sd);
    if sd_norm >= delta {
        return g_unscaled * (delta / g_norm);
    }
    // Point on the segment from the Cauchy point toward the Newton point.
    let a = p_sd.component_mul(diag);
    let b = (p_gn - p_sd).component_mul(diag);
    let bb = b.norm_squared();
    let ab = a.dot(&b);
    let aa = a.norm_squared();
    let c = aa - delta * delta;
    let disc = (ab * ab - bb * c).max(0.0);
    let tau = if ab <= 0.0 { (-ab + disc.sqrt()) / bb } else { -c / (ab + disc.sqrt()) };
    p_sd + (p_gn - p_sd) * tau.clamp(0.0, 1.0)
}

struct Iterate {
    x: Vector7,
    eval: ShootingEvaluation,
}

fn record_from(problem: &ShootingProblem, it: &Iterate, status: SolveStatus, iterations: usize, evaluations: usize, rank_tol: f64) -> SolutionRecord {
    let jac = it.eval.jacobian.as_ref().expect("iterates carry the Jacobian");
    let (rank, sv) = numerical_rank(jac, rank_tol);
    SolutionRecord {
        lam0: it.x.into(),
        eps: problem.eps.value(),
        residual_inf: it.eval.residual.amax(),
        delta_m_kg: problem.delta_m_kg(&it.eval.trajectory.terminal_state),
        n_switches: it.eval.trajectory.switch_times.len(),
        converged: status == SolveStatus::Converged,
        jacobian_rank: rank,
        singular_values: sv,
        iterations,
        evaluations,
        status,
    }
}

/// Box `|x - center| <= half_width`, componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub center: Vector7,
    pub half_width: Vector7,
}

impl Region {
    pub fn contains(&self, x: &Vector7) -> bool {
        (x - self.center).iter().zip(self.half_width.iter()).all(|(d, w)| d.abs() <= *w)
    }
}

/// Dogleg trust-region Newton iteration on the shooting function.
///
/// Steps whose propagation halts or fails count as rejected trial points.
pub fn trust_region_solve(guess: &Vector7, problem: &ShootingProblem, settings: &TrustRegionSettings) -> SolutionRecord {
    let failed = |evaluations| SolutionRecord {
        lam0: (*guess).into(),
        eps: problem.eps.value(),
        residual_inf: f64::INFINITY,
        delta_m_kg: f64::NAN,
        n_switches: 0,
        converged: false,
        jacobian_rank: 0,
        singular_values: [0.0; 7],
        iterations: 0,
        evaluations,
        status: SolveStatus::InitialFailure,
    };
    let Ok(eval) = evaluate(guess, problem, true) else {
        return failed(1);
    };
    let mut evaluations = 1;
    let mut cur = Iterate { x: *guess, eval };

    let col_norms = |j: &Matrix7| Vector7::from_fn(|c, _| j.column(c).norm());
    let jac0 = cur.eval.jacobian.unwrap();
    let mut diag = col_norms(&jac0).map(|d| if d > 0.0 { d } else { 1.0 });
    let xnorm = cur.x.component_mul(&diag).norm();
    let mut delta = if xnorm > 0.0 { settings.initial_radius * xnorm } else { settings.initial_radius };

    for iteration in 0..settings.max_iterations {
        let f = cur.eval.residual;
        if f.amax() < settings.residual_tol {
            return record_from(problem, &cur, SolveStatus::Converged, iteration, evaluations, settings.rank_tol);
        }
        let jac = cur.eval.jacobian.unwrap();
        let fnorm2 = f.norm_squared();
        let p_gn = newton_step(&jac, &f, settings.max_condition);

        // Inner loop: shrink the region until a step decreases ||f||.
        loop {
            let p = dogleg(&jac, &f, &diag, delta, &p_gn);
            let pnorm = p.component_mul(&diag).norm();
            let xs = cur.x.component_mul(&diag).norm();
            if delta <= settings.min_radius * xs.max(1.0) || pnorm <= settings.min_radius * xs.max(1.0) {
                return finish(problem, cur, SolveStatus::Stalled, iteration, evaluations, settings);
            }
            let predicted = fnorm2 - (f + jac * p).norm_squared();
            let trial = cur.x + p;
            evaluations += 1;
            let outcome = evaluate(&trial, problem, true);
            let (ratio, accepted) = match &outcome {
                Ok(e) => {
                    let actual = fnorm2 - e.residual.norm_squared();
                    let ratio = if predicted > 0.0 { actual / predicted } else { -1.0 };
                    (ratio, e.residual.norm_squared() < fnorm2 && ratio > 1e-4)
                }
                Err(_) => (-1.0, false),
            };
            if ratio < 0.25 {
                delta = 0.5 * pnorm.min(delta);
            } else if ratio > 0.75 {
                delta = delta.max(2.0 * pnorm);
            }
            if accepted {
                cur = Iterate { x: trial, eval: outcome.expect("accepted step evaluated") };
                let jn = col_norms(cur.eval.jacobian.as_ref().unwrap());
                diag = diag.zip_map(&jn, |d, n| d.max(n));
                break;
            }
        }
    }
    let status = if cur.eval.residual.amax() < settings.residual_tol { SolveStatus::Converged } else { SolveStatus::MaxIterations };
    finish(problem, cur, status, settings.max_iterations, evaluations, settings)
}

fn finish(problem: &ShootingProblem, cur: Iterate, status: SolveStatus, iterations: usize, mut evaluations: usize, settings: &TrustRegionSettings) -> SolutionRecord {
    let r = cur.eval.residual.amax();
    if status == SolveStatus::Converged || !(r < settings.polish_below) {
        return record_from(problem, &cur, status, iterations, evaluations, settings.rank_tol);
    }
    let polished = ulp_polish(cur, problem, settings.residual_tol, &mut evaluations);
    let status = if polished.eval.residual.amax() < settings.residual_tol { SolveStatus::Converged } else { status };
    record_from(problem, &polished, status, iterations, evaluations, settings.rank_tol)
}

/// Greedy search over neighbouring doubles of the co-states.
///
/// Near a root of a badly conditioned shooting function the Newton
/// correction can be smaller than the spacing of representable co-states,
/// so the iteration stalls a little above the tolerance. Each round tries
/// moving one component by 1, 2, 4 or 8 ulps and keeps the best move.
fn ulp_polish(start: Iterate, problem: &ShootingProblem, tol: f64, evaluations: &mut usize) -> Iterate {
    const ROUNDS: usize = 20;
    let nudge = |x: f64, k: i32| (0..k.abs()).fold(x, |y, _| if k > 0 { y.next_up() } else { y.next_down() });
    let mut x = start.x;
    let mut best = start.eval.residual.amax();
    for _ in 0..ROUNDS {
        let mut improved = None;
        for i in 0..7 {
            for k in [-8, -4, -2, -1, 1, 2, 4, 8] {
                let mut trial = x;
                trial[i] = nudge(x[i], k);
                *evaluations += 1;
                if let Ok(e) = evaluate(&trial, problem, false) {
                    if e.residual.amax() < best {
                        best = e.residual.amax();
                        improved = Some(trial);
                    }
                }
            }
        }
        match improved {
            Some(t) => x = t,
            None => break,
        }
        if best < tol {
            break;
        }
    }
    if x == start.x {
        return start;
    }
    *evaluations += 1;
    match evaluate(&x, problem, true) {
        Ok(eval) => Iterate { x, eval },
        Err(_) => start,
    }
}

/// Restart policy for guesses known only to a printed precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundedStart {
    /// Half of the last printed digit of each co-state.
    pub half_ulp: Vector7,
    /// Restarts drawn uniformly from the rounding box after the nominal start.
    pub restarts: usize,
    /// Solutions may lie this many of the coarsest half-ulps from the
    /// nominal value in every component.
    pub leash: f64,
    /// Iteration cap of the direct solve from each restart.
    pub restart_iterations: usize,
    /// First homotopy value of the smoothing chain tried from a restart
    /// whose direct solve fails. Zero disables the chain.
    pub smoothing_eps: f64,
    /// Iteration cap per step of the smoothing chain.
    pub smoothing_iterations: usize,
    pub seed: u64,
}

impl RoundedStart {
    pub fn new(half_ulp: Vector7) -> Self {
        Self {
            half_ulp,
            restarts: 1000,
            leash: 200.0,
            restart_iterations: 12,
            smoothing_eps: 1e-3,
            smoothing_iterations: 40,
            seed: 0,
        }
    }

    fn region(&self, center: &Vector7) -> Region {
        Region { center: *center, half_width: Vector7::repeat(self.leash * self.half_ulp.max()) }
    }
}

/// Smallest homotopy value of a smoothing chain before the final jump.
const SMOOTHING_FLOOR: f64 = 1e-6;
/// Residual that lets an intermediate step of a smoothing chain seed the next.
const PREDICTOR_TOL: f64 = 1e-8;

/// Solves at `problem.eps` through a chain of smoothed problems: the first
/// at `eps0`, each next one at a quarter of the previous value, down to
/// [`SMOOTHING_FLOOR`], and finally the target. Intermediate solutions only
/// seed the next step, so they are accepted below [`PREDICTOR_TOL`].
///
/// Returns the final solve, or the first intermediate one that failed.
pub fn smoothed_solve(guess: &Vector7, problem: &ShootingProblem, settings: &TrustRegionSettings, eps0: f64) -> SolutionRecord {
    let target = problem.eps.value();
    let mut x = *guess;
    let mut eps = eps0;
    while eps > target && eps >= SMOOTHING_FLOOR {
        let rec = trust_region_solve(&x, &problem.with_eps(Homotopy::new(eps).expect("chain stays in [0, 1]")), settings);
        if !(rec.residual_inf < PREDICTOR_TOL) {
            return rec;
        }
        x = Vector7::from(rec.lam0);
        eps /= 4.0;
    }
    trust_region_solve(&x, problem, settings)
}

/// Half of the last printed digit of a decimal literal, e.g. `0.25` gives
/// `0.005`. Exponent notation is honored.
pub fn printed_half_ulp(literal: &str) -> Option<f64> {
    let s = literal.trim();
    s.parse::<f64>().ok()?;
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let decimals = mantissa.split_once('.').map_or(0, |(_, frac)| frac.len()) as i32;
    Some(0.5 * 10f64.powi(exp - decimals))
}

/// Outcome of [`solve_rounded`].
#[derive(Debug, Clone)]
pub struct RoundedSolve {
    pub record: SolutionRecord,
    /// Solver starts used, the nominal one included.
    pub starts: usize,
    /// Converged at the target inside the leash around the nominal guess.
    pub reproduced: bool,
}

/// Re-converges a solution from co-states rounded to a printed precision.
///
/// The nominal guess is tried first. Unless it converges inside the leash,
/// the solver is restarted from deterministic points in the rounding box: a
/// short direct solve, then a smoothing chain from the same point when the
/// target is below `smoothing_eps`. A restart counts only if it converges
/// inside the leash, so that a run drifting onto a different extremal does
/// not reproduce the nominal one.
///
/// Without a reproduction the record is the converged nominal solve if there
/// is one, else the closest miss at the target inside the leash.
pub fn solve_rounded(guess: &Vector7, problem: &ShootingProblem, settings: &TrustRegionSettings, start: &RoundedStart) -> RoundedSolve {
    use rand::{Rng, SeedableRng};

    let target = problem.eps.value();
    let region = start.region(guess);
    let inside = |rec: &SolutionRecord| rec.eps == target && region.contains(&Vector7::from(rec.lam0));
    let done = |record: SolutionRecord, starts: usize| RoundedSolve { record, starts, reproduced: true };
    let first = trust_region_solve(guess, problem, settings);
    if first.converged && inside(&first) {
        return done(first, 1);
    }
    let mut best: Option<SolutionRecord> = None;
    let mut keep = |rec: SolutionRecord| {
        if inside(&rec) && best.as_ref().is_none_or(|b| rec.residual_inf < b.residual_inf) {
            best = Some(rec);
        }
    };
    let direct = TrustRegionSettings { max_iterations: start.restart_iterations, ..*settings };
    let chained = TrustRegionSettings { max_iterations: start.smoothing_iterations, ..*settings };
    let smooth = start.smoothing_eps > target;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(start.seed);
    for k in 0..start.restarts {
        let x = Vector7::from_fn(|i, _| guess[i] + start.half_ulp[i] * rng.gen_range(-1.0..=1.0));
        let rec = trust_region_solve(&x, problem, &direct);
        if rec.converged && inside(&rec) {
            return done(rec, k + 2);
        }
        keep(rec);
        if smooth {
            let rec = smoothed_solve(&x, problem, &chained, start.smoothing_eps);
            if rec.converged && inside(&rec) {
                return done(rec, k + 2);
            }
            keep(rec);
        }
    }
    let record = match best {
        Some(b) if !first.converged && (!inside(&first) || b.residual_inf < first.residual_inf) => b,
        _ => first,
    };
    RoundedSolve { record, starts: start.restarts + 1, reproduced: false }
}

/// Homotopy values `eps_j = (j^2 - 1) / (N^2 - 1)` for `j = N, ..., 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    pub n_steps: usize,
    pub epsilons: Vec<f64>,
}

impl ContinuationSchedule {
    pub const DEFAULT_STEPS: usize = 25;

    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps < 2 {
            return Err(Error::InvalidInput(format!("continuation needs at least 2 steps, got {n_steps}")));
        }
        let denom = (n_steps * n_steps - 1) as f64;
        let epsilons = (1..=n_steps).rev().map(|j| (j * j - 1) as f64 / denom).collect();
        Ok(Self { n_steps, epsilons })
    }
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self::new(Self::DEFAULT_STEPS).expect("default step count is valid")
    }
}

/// Walks the schedule from the minimum-energy guess to `eps = 0`.
///
/// A failed step is retried once through the midpoint with the previous
/// value; the chain stops at the first step that still fails. The returned
/// records cover every solve attempted, in order.
pub fn continuation_solve(
    lam0_energy: &Vector7,
    problem: &ShootingProblem,
    schedule: &ContinuationSchedule,
    settings: &TrustRegionSettings,
    mut progress: impl FnMut(&SolutionRecord),
) -> Vec<SolutionRecord> {
    let mut records = Vec::new();
    let mut guess = *lam0_energy;
    let mut prev_eps: Option<f64> = None;
    for &eps in &schedule.epsilons {
        let solve = |g: &Vector7, e: f64| trust_region_solve(g, &problem.with_eps(Homotopy::new(e).expect("schedule in [0,1]")), settings);
        let rec = solve(&guess, eps);
        progress(&rec);
        let ok = rec.converged;
        records.push(rec);
        if ok {
            guess = Vector7::from(records.last().unwrap().lam0);
            prev_eps = Some(eps);
            continue;
        }
        let Some(pe) = prev_eps else {
            return records;
        };
        let mid = 0.5 * (pe + eps);
        let mid_rec = solve(&guess, mid);
        progress(&mid_rec);
        let mid_ok = mid_rec.converged;
        let mid_lam = Vector7::from(mid_rec.lam0);
        records.push(mid_rec);
        if !mid_ok {
            return records;
        }
        let retry = solve(&mid_lam, eps);
        progress(&retry);
        let retry_ok = retry.converged;
        records.push(retry);
        if !retry_ok {
            return records;
        }
        guess = Vector7::from(records.last().unwrap().lam0);
        prev_eps = Some(eps);
    }
    records
}
