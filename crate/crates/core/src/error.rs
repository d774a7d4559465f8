use thiserror::Error;

use crate::propagation::HaltReason;

/// Errors raised by the dynamics, propagation and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spacecraft at primary {primary}: distance {distance:e} below singularity guard")]
    Singularity { primary: u8, distance: f64 },

    #[error("degenerate primer vector: |lambda_v| = {0:e}")]
    DegeneratePrimer(f64),

    #[error("jacobian requested exactly on a switching surface (S = {0})")]
    OnSwitchSurface(f64),

    #[error("grazing switch: |dS/dt| = {0:e}")]
    GrazingSwitch(f64),

    #[error("maximum number of integration steps ({0}) exceeded")]
    MaxStepsExceeded(usize),

    #[error("step size underflow at t = {0}")]
    StepSizeUnderflow(f64),

    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),

    #[error("trajectory halted: {0}")]
    HaltedTrajectory(HaltReason),

    #[error("root bracketing failed: {0}")]
    Bracketing(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
