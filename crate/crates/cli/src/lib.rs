//! Pipeline commands behind the `lowthrust` binary: swarm initialization
//! with continuation (`solve`), single solves (`shoot`), trajectory export
//! (`propagate`) and re-convergence of published solutions (`validate`).
//!
//! Every command returns an [`Outcome`] whose [`Outcome::code`] is the
//! process exit code.

use std::path::{Path, PathBuf};

use lowthrust_core::scenario::ParseError;
use lowthrust_core::{HaltReason, Scenario};

mod commands;
pub mod export;
pub mod manifest;

pub use commands::*;
pub use manifest::{Outcome, RecordOut, RunManifest, ValidationEntry, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Usage(String),
    #[error("propagation halted: {0}")]
    Halted(HaltReason),
    #[error(transparent)]
    Core(#[from] lowthrust_core::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// Loads a scenario from a config file, or one of the two built-in
/// transfers by name (`scenario1_gto_l1`, `scenario2_l2_l1`) when no such
/// file exists.
pub fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return Scenario::parse(&text).map_err(|source| CliError::Parse { path: path.to_path_buf(), source });
    }
    match spec {
        "scenario1_gto_l1" => Ok(Scenario::gto_to_l1()),
        "scenario2_l2_l1" => Ok(Scenario::l2_to_l1()),
        _ => Err(CliError::Usage(format!("no scenario file or built-in scenario named `{spec}`"))),
    }
}

/// Parses seven co-state literals. The printed precision of each literal is
/// kept, since `shoot` restarts inside that rounding box.
pub fn parse_costates(literals: &[String]) -> Result<([f64; 7], [f64; 7]), CliError> {
    if literals.len() != 7 {
        return Err(CliError::Usage(format!("expected 7 co-state values, got {}", literals.len())));
    }
    let mut values = [0.0; 7];
    let mut half_ulps = [0.0; 7];
    for (i, lit) in literals.iter().enumerate() {
        let v: f64 = lit.trim().parse().map_err(|_| CliError::Usage(format!("invalid co-state `{lit}`")))?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!("co-state `{lit}` is not finite")));
        }
        values[i] = v;
        half_ulps[i] = lowthrust_core::shooting::printed_half_ulp(lit).expect("literal parsed above");
    }
    Ok((values, half_ulps))
}
