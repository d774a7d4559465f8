//! Particle swarm search over the initial co-states of the minimum-energy
//! problem.
//!
//! The update follows the adaptive-inertia, adaptive-neighborhood scheme of
//! MATLAB's `particleswarm`: each particle is pulled toward its own best and
//! toward the best of a random subset of the swarm. A counter of
//! non-improving iterations doubles the inertia while it is below 2 and
//! halves it above 5; the subset grows on every non-improving iteration.
//! Objective evaluations run in parallel, while every random draw and every
//! update happens sequentially in particle order, so results do not depend
//! on the thread schedule.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::shooting::{evaluate, ShootingProblem, Vector7};

pub type Position = [f64; 7];

/// Swarm size, bounds and stopping rules.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub init_lower: Position,
    pub init_upper: Position,
    pub search_lower: Position,
    pub search_upper: Position,
    pub inertia_range: (f64, f64),
    pub self_weight: f64,
    pub social_weight: f64,
    pub min_neighborhood_fraction: f64,
    pub stall_iterations: usize,
    /// Absolute improvement of the best value, over `stall_iterations`
    /// iterations, at or below which the search stops.
    pub stall_tolerance: f64,
    pub max_wall_time: Duration,
    pub max_iterations: usize,
    pub rng_seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            swarm_size: 500,
            init_lower: [-40.0, -40.0, -40.0, -2.0, -2.0, -2.0, 0.0],
            init_upper: [40.0, 40.0, 40.0, 2.0, 2.0, 2.0, 2.0],
            search_lower: [-100.0, -100.0, -100.0, -10.0, -10.0, -10.0, 0.0],
            search_upper: [100.0, 100.0, 100.0, 10.0, 10.0, 10.0, 10.0],
            inertia_range: (0.1, 1.1),
            self_weight: 1.49,
            social_weight: 1.49,
            min_neighborhood_fraction: 0.05,
            stall_iterations: 50,
            stall_tolerance: 1e-6,
            max_wall_time: Duration::from_secs(1800),
            max_iterations: 1400,
            rng_seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.swarm_size < 2 {
            return bad("swarm needs at least two particles");
        }
        for i in 0..7 {
            let (il, iu, sl, su) = (self.init_lower[i], self.init_upper[i], self.search_lower[i], self.search_upper[i]);
            if !(il <= iu && sl < su) || !(il.is_finite() && iu.is_finite() && sl.is_finite() && su.is_finite()) {
                return bad("bounds must be finite and ordered");
            }
            if il < sl || iu > su {
                return bad("initialization bounds must lie inside the search bounds");
            }
        }
        let (wl, wu) = self.inertia_range;
        if !(wl > 0.0 && wl <= wu) {
            return bad("inertia range must be positive and ordered");
        }
        if !(self.min_neighborhood_fraction > 0.0 && self.min_neighborhood_fraction <= 1.0) {
            return bad("neighborhood fraction must lie in (0, 1]");
        }
        if self.stall_iterations == 0 || self.max_iterations == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }

    pub fn min_neighborhood(&self) -> usize {
        ((self.swarm_size as f64 * self.min_neighborhood_fraction).floor() as usize).max(2).min(self.swarm_size)
    }
}

/// Weights of the squared residual and the value given to infeasible points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoObjectiveSpec {
    pub weights: Position,
    pub infeasible_penalty: f64,
}

impl Default for PsoObjectiveSpec {
    fn default() -> Self {
        Self { weights: [10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0], infeasible_penalty: 1e10 }
    }
}

impl PsoObjectiveSpec {
    /// `e^T W e`, or the penalty when `e` is not finite.
    pub fn weigh(&self, e: &Vector7) -> f64 {
        let j: f64 = e.iter().zip(self.weights.iter()).map(|(x, w)| w * x * x).sum();
        if j.is_finite() {
            j.min(self.infeasible_penalty)
        } else {
            self.infeasible_penalty
        }
    }
}

/// Final-time residual from the initial co-states; halted or failed
/// propagations are errors.
pub fn boundary_residual(lam0: &Position, problem: &ShootingProblem) -> Result<Vector7> {
    Ok(evaluate(&Vector7::from(*lam0), problem, false)?.residual)
}

/// Weighted squared residual; total over all inputs.
pub fn pso_objective(lam0: &Position, problem: &ShootingProblem, spec: &PsoObjectiveSpec) -> f64 {
    match boundary_residual(lam0, problem) {
        Ok(e) => spec.weigh(&e),
        Err(_) => spec.infeasible_penalty,
    }
}

/// A function minimized by the swarm.
pub trait Objective: Sync {
    fn value(&self, x: &Position) -> f64;
}

impl<F: Fn(&Position) -> f64 + Sync> Objective for F {
    fn value(&self, x: &Position) -> f64 {
        self(x)
    }
}

/// The shooting residual objective of a problem.
pub struct ShootingObjective<'a> {
    pub problem: &'a ShootingProblem,
    pub spec: PsoObjectiveSpec,
}

impl Objective for ShootingObjective<'_> {
    fn value(&self, x: &Position) -> f64 {
        pso_objective(x, self.problem, &self.spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Position,
    pub velocity: Position,
    pub best_position: Position,
    pub best_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Stall,
    WallTime,
    MaxIterations,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stall => "stall",
            Self::WallTime => "time",
            Self::MaxIterations => "max-iterations",
        }
    }
}

/// State reported after every iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoProgress {
    pub iteration: usize,
    pub best_value: f64,
    pub evaluations: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best_position: Position,
    pub best_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub elapsed: Duration,
    pub stop_reason: StopReason,
    /// Global best after initialization and after each iteration.
    pub history: Vec<f64>,
}

fn evaluate_all<O: Objective + ?Sized>(objective: &O, positions: &[Position]) -> Vec<f64> {
    positions
        .par_iter()
        .map(|x| {
            let v = objective.value(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .collect()
}

/// Runs the swarm until the best value stalls, the wall-time budget is
/// spent, or the iteration cap is reached.
pub fn pso_minimize<O: Objective + ?Sized>(
    objective: &O,
    config: &SwarmConfig,
    mut progress: impl FnMut(&PsoProgress),
) -> Result<PsoResult> {
    config.validate()?;
    let start = Instant::now();
    let n = config.swarm_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let span: Position = std::array::from_fn(|d| config.search_upper[d] - config.search_lower[d]);

    let mut particles: Vec<Particle> = (0..n)
        .map(|_| {
            let position: Position = std::array::from_fn(|d| rng.gen_range(config.init_lower[d]..=config.init_upper[d]));
            let velocity: Position = std::array::from_fn(|d| {
                let r = config.init_upper[d] - config.init_lower[d];
                rng.gen_range(-r..=r)
            });
            Particle { position, velocity, best_position: position, best_value: f64::INFINITY }
        })
        .collect();

    let positions: Vec<Position> = particles.iter().map(|p| p.position).collect();
    let values = evaluate_all(objective, &positions);
    let mut evaluations = n;
    for (p, v) in particles.iter_mut().zip(&values) {
        p.best_value = *v;
    }
    let mut best_index = 0;
    for (i, p) in particles.iter().enumerate() {
        if p.best_value < particles[best_index].best_value {
            best_index = i;
        }
    }
    let mut best_value = particles[best_index].best_value;
    let mut best_position = particles[best_index].best_position;
    let mut history = vec![best_value];

    let min_hood = config.min_neighborhood();
    let mut hood = min_hood;
    let (w_min, w_max) = config.inertia_range;
    let mut inertia = w_max;
    let mut stall_counter = 0usize;
    let mut iteration = 0;
    progress(&PsoProgress { iteration, best_value, evaluations, elapsed: start.elapsed() });

    let stop_reason = loop {
        if iteration >= config.max_iterations {
            break StopReason::MaxIterations;
        }
        if start.elapsed() >= config.max_wall_time {
            break StopReason::WallTime;
        }
        iteration += 1;

        // Sequential update with all random draws in particle order. The
        // neighborhood is the particle itself plus `hood - 1` distinct others.
        for i in 0..n {
            let mut g = i;
            for j in sample(&mut rng, n - 1, hood - 1) {
                let j = if j >= i { j + 1 } else { j };
                if particles[j].best_value < particles[g].best_value {
                    g = j;
                }
            }
            let social = particles[g].best_position;
            let p = &mut particles[i];
            for d in 0..7 {
                let u1: f64 = rng.gen();
                let u2: f64 = rng.gen();
                let mut v = inertia * p.velocity[d]
                    + config.self_weight * u1 * (p.best_position[d] - p.position[d])
                    + config.social_weight * u2 * (social[d] - p.position[d]);
                v = v.clamp(-span[d], span[d]);
                let mut x = p.position[d] + v;
                if x < config.search_lower[d] {
                    x = config.search_lower[d];
                    v = 0.0;
                } else if x > config.search_upper[d] {
                    x = config.search_upper[d];
                    v = 0.0;
                }
                p.position[d] = x;
                p.velocity[d] = v;
            }
        }

        let positions: Vec<Position> = particles.iter().map(|p| p.position).collect();
        let values = evaluate_all(objective, &positions);
        evaluations += n;
        let previous_best = best_value;
        for (p, v) in particles.iter_mut().zip(values) {
            if v < p.best_value {
                p.best_value = v;
                p.best_position = p.position;
            }
            if v < best_value {
                best_value = v;
                best_position = p.position;
            }
        }

        if best_value < previous_best {
            stall_counter = stall_counter.saturating_sub(1);
            hood = min_hood;
        } else {
            stall_counter += 1;
            hood = (hood + min_hood).min(n);
        }
        if stall_counter < 2 {
            inertia *= 2.0;
        } else if stall_counter > 5 {
            inertia /= 2.0;
        }
        inertia = inertia.clamp(w_min, w_max);
        history.push(best_value);
        progress(&PsoProgress { iteration, best_value, evaluations, elapsed: start.elapsed() });

        if iteration >= config.stall_iterations {
            let past = history[iteration - config.stall_iterations];
            if past - best_value <= config.stall_tolerance {
                break StopReason::Stall;
            }
        }
    };

    Ok(PsoResult { best_position, best_value, iterations: iteration, evaluations, elapsed: start.elapsed(), stop_reason, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &Position) -> f64 {
        let target = [1.0, -2.0, 3.0, 0.5, -0.25, 0.1, 0.7];
        x.iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn small_config(seed: u64) -> SwarmConfig {
        SwarmConfig { swarm_size: 100, max_iterations: 200, rng_seed: seed, stall_tolerance: 0.0, ..SwarmConfig::default() }
    }

    #[test]
    fn default_config_is_valid() {
        let c = SwarmConfig::default();
        c.validate().unwrap();
        assert_eq!(c.min_neighborhood(), 25);
        assert_eq!(SwarmConfig { swarm_size: 10, ..c }.min_neighborhood(), 2);
    }

    #[test]
    fn rejects_init_box_outside_search_box() {
        let mut c = SwarmConfig::default();
        c.init_upper[0] = 200.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn finds_quadratic_minimizer() {
        let r = pso_minimize(&quadratic, &small_config(3), |_| {}).unwrap();
        let target = [1.0, -2.0, 3.0, 0.5, -0.25, 0.1, 0.7];
        for (a, b) in r.best_position.iter().zip(target.iter()) {
            assert!((a - b).abs() < 1e-3, "{:?}", r.best_position);
        }
        assert!(r.iterations <= 200);
    }

    #[test]
    fn history_is_monotone_and_seeded_runs_repeat() {
        let a = pso_minimize(&quadratic, &small_config(11), |_| {}).unwrap();
        let b = pso_minimize(&quadratic, &small_config(11), |_| {}).unwrap();
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.best_position, b.best_position);
        assert_eq!(a.history, b.history);
        let c = pso_minimize(&quadratic, &small_config(12), |_| {}).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn stall_rule_stops_flat_objective() {
        let flat = |_: &Position| 1.0;
        let c = SwarmConfig { swarm_size: 10, stall_iterations: 5, ..SwarmConfig::default() };
        let r = pso_minimize(&flat, &c, |_| {}).unwrap();
        assert_eq!(r.stop_reason, StopReason::Stall);
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn weighting_and_penalty() {
        let spec = PsoObjectiveSpec::default();
        assert_eq!(spec.weigh(&Vector7::zeros()), 0.0);
        let mut e = Vector7::zeros();
        e[0] = 1.0;
        assert_eq!(spec.weigh(&e), 10.0);
        e[3] = f64::NAN;
        assert_eq!(spec.weigh(&e), 1e10);
    }
}
