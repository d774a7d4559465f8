//! Adaptive explicit Runge–Kutta stepping with a lazily built continuous
//! extension.
//!
//! The stepper advances one accepted step at a time so callers can inspect
//! each step (event detection, guards) before moving on.

use crate::error::{Error, Result};
use crate::tableau::{A, A_DENSE, B_DENSE, B_HIGH, B_LOW, C, C_DENSE, DENSE_DEGREE, DENSE_STAGES, EXTRA_STAGES, STAGES};

/// A first-order system `y' = f(t, y)` of fixed dimension.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
/// Exponent of the step-size controller: one over (embedded order + 1).
const CONTROL_EXPONENT: f64 = 1.0 / 9.0;

/// Tolerances and limits for [`Stepper`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Only the leading `error_dim` components enter the error norm; `None`
    /// means all of them.
    pub error_dim: Option<usize>,
}

/// Verner 9(8) stepper holding the last accepted step for interpolation.
pub struct Stepper {
    n: usize,
    cfg: StepperConfig,
    /// Stages of the last accepted step, plus the interpolation stages.
    k: Vec<Vec<f64>>,
    dense_ready: bool,
    scratch_k: Vec<Vec<f64>>,
    ystage: Vec<f64>,
    ytrial: Vec<f64>,

    pub t: f64,
    pub y: Vec<f64>,
    f: Vec<f64>,
    pub t_prev: f64,
    pub y_prev: Vec<f64>,
    f_prev: Vec<f64>,
    h_prev: f64,
    h: f64,

    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl Stepper {
    pub fn new(n: usize, cfg: StepperConfig) -> Self {
        Self {
            n,
            cfg,
            k: vec![vec![0.0; n]; DENSE_STAGES],
            dense_ready: false,
            scratch_k: vec![vec![0.0; n]; STAGES],
            ystage: vec![0.0; n],
            ytrial: vec![0.0; n],
            t: 0.0,
            y: vec![0.0; n],
            f: vec![0.0; n],
            t_prev: 0.0,
            y_prev: vec![0.0; n],
            f_prev: vec![0.0; n],
            h_prev: 0.0,
            h: 0.0,
            accepted: 0,
            rejected: 0,
            evaluations: 0,
        }
    }

    /// Starts (or restarts) integration at `(t0, y0)`. The step proposal is
    /// kept across restarts unless none exists yet.
    pub fn reset<S: OdeSystem>(&mut self, sys: &mut S, t0: f64, y0: &[f64], t_end: f64) -> Result<()> {
        self.t = t0;
        self.y.copy_from_slice(y0);
        sys.rhs(t0, y0, &mut self.f)?;
        self.evaluations += 1;
        self.t_prev = t0;
        self.y_prev.copy_from_slice(y0);
        self.f_prev.copy_from_slice(&self.f);
        self.h_prev = 0.0;
        self.dense_ready = false;
        if self.h <= 0.0 {
            self.h = self.initial_step(sys, t_end)?;
        }
        Ok(())
    }

    fn weight(&self, a: f64, b: f64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.abs().max(b.abs())
    }

    fn error_dim(&self) -> usize {
        self.cfg.error_dim.unwrap_or(self.n).min(self.n)
    }

    /// Starting step guess (Hairer, Nørsett & Wanner, II.4).
    fn initial_step<S: OdeSystem>(&mut self, sys: &mut S, t_end: f64) -> Result<f64> {
        let span = t_end - self.t;
        let nd = self.error_dim();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..nd {
            let w = self.weight(self.y[i], self.y[i]);
            d0 += (self.y[i] / w).powi(2);
            d1 += (self.f[i] / w).powi(2);
        }
        d0 = (d0 / nd as f64).sqrt();
        d1 = (d1 / nd as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for i in 0..self.n {
            self.ystage[i] = self.y[i] + h0 * self.f[i];
        }
        let mut f1 = vec![0.0; self.n];
        sys.rhs(self.t + h0, &self.ystage, &mut f1)?;
        self.evaluations += 1;
        let mut d2 = 0.0;
        for i in 0..nd {
            let w = self.weight(self.y[i], self.y[i]);
            d2 += ((f1[i] - self.f[i]) / w).powi(2);
        }
        d2 = (d2 / nd as f64).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 9.0)
        };
        Ok((100.0 * h0).min(h1).min(span))
    }

    /// Runs the sixteen stages from `(t0, y0, f0)` with step `h`, writing the
    /// 9th-order result into `y_out` and returning the scaled error norm.
    fn attempt<S: OdeSystem>(
        sys: &mut S,
        stages: &mut [Vec<f64>],
        ystage: &mut [f64],
        t0: f64,
        y0: &[f64],
        f0: &[f64],
        h: f64,
        y_out: &mut [f64],
        cfg: &StepperConfig,
    ) -> Result<f64> {
        let n = y0.len();
        stages[0].copy_from_slice(f0);
        for s in 1..STAGES {
            ystage.copy_from_slice(y0);
            for (j, kj) in stages.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    let ha = h * a;
                    for i in 0..n {
                        ystage[i] += ha * kj[i];
                    }
                }
            }
            let (_, rest) = stages.split_at_mut(s);
            sys.rhs(t0 + C[s] * h, ystage, &mut rest[0])?;
        }
        let nd = cfg.error_dim.unwrap_or(n).min(n);
        let mut err = 0.0;
        for i in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..STAGES {
                hi += B_HIGH[s] * stages[s][i];
                lo += B_LOW[s] * stages[s][i];
            }
            y_out[i] = y0[i] + h * hi;
            if i < nd {
                let w = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y_out[i].abs());
                err += (h * (hi - lo) / w).powi(2);
            }
        }
        let err = (err / nd as f64).sqrt();
        if !err.is_finite() || y_out.iter().any(|x| !x.is_finite()) {
            return Ok(f64::INFINITY);
        }
        Ok(err)
    }

    /// Takes one accepted step, never passing `t_end`.
    pub fn step<S: OdeSystem>(&mut self, sys: &mut S, t_end: f64) -> Result<()> {
        let mut reject = false;
        loop {
            if self.accepted + self.rejected >= self.cfg.max_steps {
                return Err(Error::MaxStepsExceeded(self.cfg.max_steps));
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(remaining);
            // Avoid leaving a sliver at the end of the span.
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            if self.h <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow(self.t));
            }
            let mut ytrial = std::mem::take(&mut self.ytrial);
            let err = Self::attempt(sys, &mut self.k, &mut self.ystage, self.t, &self.y, &self.f, h, &mut ytrial, &self.cfg);
            self.evaluations += STAGES - 1;
            let err = match err {
                Ok(e) => e,
                // A stage may leave the valid domain when the step is too long.
                Err(Error::Singularity { .. }) | Err(Error::DegeneratePrimer(_)) if h > 1e-6 * remaining.max(1e-12) => f64::INFINITY,
                Err(e) => {
                    self.ytrial = ytrial;
                    return Err(e);
                }
            };
            if err <= 1.0 {
                let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-CONTROL_EXPONENT)).clamp(FAC_MIN, FAC_MAX) };
                let fac = if reject { fac.min(1.0) } else { fac };
                self.t_prev = self.t;
                std::mem::swap(&mut self.y_prev, &mut self.y);
                std::mem::swap(&mut self.f_prev, &mut self.f);
                self.y.copy_from_slice(&ytrial);
                self.ytrial = ytrial;
                self.h_prev = h;
                self.t = if h == remaining { t_end } else { self.t_prev + h };
                sys.rhs(self.t, &self.y, &mut self.f)?;
                self.evaluations += 1;
                self.dense_ready = false;
                self.accepted += 1;
                // A step clipped at t_end says nothing about the next one.
                if h >= self.h {
                    self.h = h * fac;
                }
                return Ok(());
            }
            self.ytrial = ytrial;
            self.rejected += 1;
            reject = true;
            let fac = if err.is_finite() { (SAFETY * err.powf(-CONTROL_EXPONENT)).clamp(FAC_MIN, 1.0) } else { 0.25 };
            self.h = h * fac;
        }
    }

    /// Step size of the last accepted step.
    pub fn last_step(&self) -> f64 {
        self.h_prev
    }

    /// Builds the interpolation stages for the last accepted step.
    fn prepare_dense<S: OdeSystem>(&mut self, sys: &mut S) -> Result<()> {
        if self.dense_ready {
            return Ok(());
        }
        let h = self.h_prev;
        for e in 0..EXTRA_STAGES {
            let s = STAGES + e;
            self.ystage.copy_from_slice(&self.y_prev);
            for j in 0..s {
                let a = A_DENSE[e][j];
                if a != 0.0 {
                    let ha = h * a;
                    for i in 0..self.n {
                        self.ystage[i] += ha * self.k[j][i];
                    }
                }
            }
            let (_, rest) = self.k.split_at_mut(s);
            sys.rhs(self.t_prev + C_DENSE[e] * h, &self.ystage, &mut rest[0])?;
            self.evaluations += 1;
        }
        self.dense_ready = true;
        Ok(())
    }

    /// Continuous extension of the last accepted step at time `t`.
    pub fn interpolate<S: OdeSystem>(&mut self, sys: &mut S, t: f64, out: &mut [f64]) -> Result<()> {
        if t == self.t {
            out.copy_from_slice(&self.y);
            return Ok(());
        }
        if t == self.t_prev {
            out.copy_from_slice(&self.y_prev);
            return Ok(());
        }
        self.prepare_dense(sys)?;
        let h = self.h_prev;
        let theta = (t - self.t_prev) / h;
        let mut w = [0.0; DENSE_STAGES];
        for (s, ws) in w.iter_mut().enumerate() {
            let row = &B_DENSE[s];
            let mut p = row[DENSE_DEGREE - 1];
            for d in (0..DENSE_DEGREE - 1).rev() {
                p = p * theta + row[d];
            }
            *ws = p * theta * h;
        }
        out.copy_from_slice(&self.y_prev);
        for (s, ws) in w.iter().enumerate() {
            if *ws != 0.0 {
                for i in 0..self.n {
                    out[i] += ws * self.k[s][i];
                }
            }
        }
        Ok(())
    }

    /// Re-integrates the last accepted step with a single step ending at
    /// `t_target`, which must lie inside that step.
    pub fn partial_step<S: OdeSystem>(&mut self, sys: &mut S, t_target: f64, out: &mut [f64]) -> Result<()> {
        let h = t_target - self.t_prev;
        if h == 0.0 {
            out.copy_from_slice(&self.y_prev);
            return Ok(());
        }
        Self::attempt(sys, &mut self.scratch_k, &mut self.ystage, self.t_prev, &self.y_prev, &self.f_prev, h, out, &self.cfg)?;
        self.evaluations += STAGES - 1;
        Ok(())
    }

    pub fn derivative(&self) -> &[f64] {
        &self.f
    }

    pub fn previous_derivative(&self) -> &[f64] {
        &self.f_prev
    }
}
