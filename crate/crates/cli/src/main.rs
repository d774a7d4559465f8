use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use lowthrust_cli::*;

#[derive(Parser)]
#[command(name = "lowthrust", version, about = "PSO-initialized minimum-fuel low-thrust transfers in the CR3BP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Swarm initialization at eps = 1 followed by continuation to eps = 0.
    Solve {
        /// Scenario config file, or a built-in scenario name.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 500)]
        swarm_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Swarm wall-time budget, seconds.
        #[arg(long, default_value_t = 1800.0)]
        max_time: f64,
        /// Continuation steps.
        #[arg(long = "continue", default_value_t = 25)]
        steps: usize,
        /// Integration tolerance during the swarm phase.
        #[arg(long, default_value_t = 1e-14)]
        swarm_tol: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Trust-region shooting from given co-states.
    Shoot {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Run the full continuation from eps = 1 with this many steps.
        #[arg(long = "continue")]
        steps: Option<usize>,
        /// Restarts inside the printed-precision box of the co-states.
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// lr1 lr2 lr3 lv1 lv2 lv3 lm
        #[arg(num_args = 7, allow_negative_numbers = true, required = true)]
        costates: Vec<String>,
    },
    /// Propagate co-states over the time of flight and export a CSV.
    Propagate {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(num_args = 7, allow_negative_numbers = true, required = true)]
        costates: Vec<String>,
    },
    /// Re-converge the shipped published solutions.
    Validate {
        /// Directory with the scenario configs and published_solutions.txt.
        #[arg(long, default_value = "scenarios")]
        scenario: PathBuf,
        /// Only these labels.
        #[arg(long = "label")]
        labels: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Solve { scenario, swarm_size, seed, max_time, steps, swarm_tol, samples, out } => {
            if !(max_time >= 0.0 && max_time.is_finite()) {
                return Err(CliError::Usage(format!("invalid --max-time {max_time}")));
            }
            let mut opts = SolveOptions::new(load_scenario(&scenario)?, out);
            opts.swarm.swarm_size = swarm_size;
            opts.swarm.rng_seed = seed;
            opts.swarm.max_wall_time = Duration::from_secs_f64(max_time);
            opts.swarm_tol = swarm_tol;
            opts.continuation_steps = steps;
            opts.samples = samples;
            let run = cmd_solve(&opts)?;
            let m = &run.manifest;
            println!(
                "pso: {} after {} iterations, J = {:.6e}",
                m.pso.stop_reason, m.pso.iterations, m.pso.best_value
            );
            if let Some(r) = m.records.last() {
                println!("{}", record_line(r));
            }
            println!("manifest: {}", opts.out_dir.join(MANIFEST_FILE).display());
            Ok(run.outcome)
        }
        Command::Shoot { scenario, epsilon, steps, restarts, out, costates } => {
            let (values, half_ulps) = parse_costates(&costates)?;
            let opts = ShootOptions {
                continue_steps: steps,
                restarts,
                out_dir: out,
                ..ShootOptions::new(load_scenario(&scenario)?, values, half_ulps, epsilon)
            };
            let run = cmd_shoot(&opts)?;
            for r in &run.records {
                println!("{}", record_line(r));
            }
            if steps.is_none() && run.last().converged && !run.reproduced {
                println!("note: converged outside the printed-precision leash of the given co-states");
            }
            Ok(run.outcome)
        }
        Command::Propagate { scenario, epsilon, samples, out, costates } => {
            let (values, _) = parse_costates(&costates)?;
            let opts = PropagateOptions { scenario: load_scenario(&scenario)?, costates: values, eps: epsilon, samples, out };
            let (outcome, traj) = cmd_propagate(&opts)?;
            println!("{} switches, {} rows written to {}", traj.switch_times.len(), traj.samples.len() + traj.switch_times.len(), opts.out.display());
            Ok(outcome)
        }
        Command::Validate { scenario, labels, restarts, out } => {
            let opts = ValidateOptions { labels, restarts, out_dir: out, ..ValidateOptions::new(scenario) };
            let report = cmd_validate(&opts, |e| {
                println!(
                    "{:<6} {} dm {:.3} kg (published {} ± {}) residual {:.2e} starts {} revs {} (published {}): {}",
                    e.label,
                    e.scenario,
                    e.record.delta_m_kg,
                    e.expected_delta_m_kg,
                    e.tolerance_kg,
                    e.record.residual_inf,
                    e.starts,
                    e.revolutions.map_or("-".to_string(), |n| n.to_string()),
                    e.expected_revolutions.map_or("-".to_string(), |n| n.to_string()),
                    if e.pass { "PASS" } else { "FAIL" }
                );
            })?;
            Ok(report.outcome)
        }
    }
}

fn record_line(r: &RecordOut) -> String {
    format!(
        "eps {:.6} {} residual {:.3e} dm {:.4} kg switches {} rank {} iterations {} lam0 {:?}",
        r.eps, r.status, r.residual_inf, r.delta_m_kg, r.n_switches, r.jacobian_rank, r.iterations, r.lam0
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Outcome::Failure.code() as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Outcome::Failure.code() as u8)
        }
    }
}
