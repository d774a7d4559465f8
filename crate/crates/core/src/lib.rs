//! Indirect minimum-fuel low-thrust transfers in the circular restricted
//! three-body problem.
//!
//! The pipeline runs a particle swarm over the initial co-states of the
//! minimum-energy problem, then walks an energy-to-fuel homotopy down to the
//! bang-bang minimum-fuel extremal with trust-region single shooting.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod ode;
pub mod propagation;
pub mod pso;
pub mod scenario;
pub mod shooting;
mod tableau;

pub use control::{ExtendedState, Homotopy, StateMatrix, StateVector, ThrottleRegime};
pub use dynamics::{SpacecraftParams, SystemConstants};
pub use error::{Error, Result};
pub use propagation::{HaltReason, IntegratorSettings, Model, StateTransition, TrajectorySolution};
pub use pso::{PsoObjectiveSpec, PsoResult, StopReason, SwarmConfig};
pub use scenario::{PublishedSolution, Scenario, TimeOfFlight};
pub use shooting::{
    ContinuationSchedule, Matrix7, ShootingProblem, SolutionRecord, SolveStatus, TrustRegionSettings, Vector7,
};
