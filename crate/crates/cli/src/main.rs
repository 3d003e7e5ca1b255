//! `quasicontrol <derive|simulate|solve|check> --config <path>`
//!
//! Exit codes: 0 ok, 1 check failure, 2 configuration error, 3 regularity
//! verdict false, 4 regularity failure during integration, 5 non-finite
//! state, 6 boundary value problem did not converge.

mod checks;
mod config;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use quasicontrol::quasivel::structure_coefficients;
use quasicontrol::reduction::{constraint_values, m_point};
use quasicontrol::skinner_rusk::regularity;
use quasicontrol::{
    integrate, shoot, DiffConfig, Error, MechanicalSystem, ReducedProblem, SecondOrderPoint, TrajectoryLogF64,
};
use serde_json::json;

use config::{BuiltSystem, Command, ConfigError, Format, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "quasicontrol", version, about = "Optimal control of underactuated systems in quasivelocities")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Trajectory file; overrides [output].path. Standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for the randomized checks; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(2, format!("config error: {e}"))
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(2, format!("i/o error: {e}"))
    }
}

/// Library errors that are not specific to one command.
fn lib_failure(e: Error) -> Failure {
    let code = match e {
        Error::RegularityFailure { .. } => 4,
        Error::NonFiniteEvaluation { .. } | Error::StepSizeUnderflow { .. } => 5,
        Error::NoConvergence { .. } => 6,
        _ => 2,
    };
    Failure::new(code, e.to_string())
}

struct Run {
    cfg: RunConfig,
    output: Option<PathBuf>,
    format: Format,
    seed: u64,
}

impl Run {
    fn sink(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn write_log(&self, log: &TrajectoryLogF64, n: usize, m: usize) -> io::Result<()> {
        let mut out = self.sink()?;
        output::write_log(&mut out, log, n, m, self.format)?;
        out.flush()
    }
}

fn derive<M: MechanicalSystem>(run: &Run, rp: &ReducedProblem<M>) -> Result<(), Failure> {
    let w = run.cfg.initial_state()?;
    let m = w.m();
    let coeffs = structure_coefficients(&rp.sys, &w.q, &DiffConfig::dual()).map_err(lib_failure)?;
    println!("structure coefficients C^d_ab (nonzero, 1-based):");
    for (d, a, b, v) in coeffs.nonzero(1e-12) {
        println!("  C^{}_{}{} = {v:.16e}", d + 1, a + 1, b + 1);
    }
    let mp = m_point(rp, &w.q, &w.y, &w.ydot_a).map_err(lib_failure)?;
    let pt = SecondOrderPoint::new(w.q.clone(), w.y.clone(), mp.ydot.clone()).map_err(lib_failure)?;
    let phi = constraint_values(rp, &pt).map_err(lib_failure)?;
    println!("constraint residual max|Phi| = {:.3e}", phi.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    println!("G = {:?}", &mp.ydot[m..]);
    println!("controls u = {:?}", mp.controls);
    let rep = regularity(rp, &w).map_err(lib_failure)?;
    println!("R =");
    for a in 0..m {
        let row: Vec<String> = (0..m).map(|b| format!("{:.16e}", rep.r[(a, b)])).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("det R = {:.16e}", rep.det);
    println!("condition = {:.3e}", rep.condition);
    println!("symplectic: {}", rep.symplectic);
    if rep.symplectic {
        Ok(())
    } else {
        Err(Failure::new(3, "regularity matrix is singular: W1 is not symplectic"))
    }
}

fn simulate<M: MechanicalSystem>(run: &Run, rp: &ReducedProblem<M>) -> Result<(), Failure> {
    let w = run.cfg.initial_state()?;
    let icfg = run.cfg.integrator()?;
    let (n, m) = (w.n(), w.m());
    let log = match integrate(rp, &w, &icfg) {
        Ok(log) => log,
        Err(e) => {
            // Nothing was integrated; leave a header-only file behind.
            let empty = TrajectoryLogF64 {
                times: vec![],
                states: vec![],
                hamiltonian: vec![],
                constraint_residual: vec![],
                controls: vec![],
                cost: vec![],
                halted: None,
            };
            run.write_log(&empty, n, m)?;
            return Err(lib_failure(e));
        }
    };
    run.write_log(&log, n, m)?;
    match log.halted {
        Some(e) => Err(lib_failure(e)),
        None => Ok(()),
    }
}

fn solve<M: MechanicalSystem>(run: &Run, rp: &ReducedProblem<M>) -> Result<(), Failure> {
    let spec = run.cfg.bvp()?;
    let icfg = run.cfg.integrator()?;
    let (n, m) = (rp.dim(), rp.actuated());
    match shoot(rp, &spec, &icfg) {
        Ok(out) => {
            run.write_log(&out.log, n, m)?;
            println!(
                "{}",
                json!({
                    "converged": out.converged,
                    "iterations": out.iterations,
                    "residual": out.residual,
                    "cost": out.log.total_cost(),
                })
            );
            Ok(())
        }
        Err(Error::NoConvergence { iterations, best_residual }) => {
            println!(
                "{}",
                json!({ "converged": false, "iterations": iterations, "residual": best_residual, "cost": null })
            );
            Err(Failure::new(6, format!("no convergence after {iterations} iterations")))
        }
        Err(e) => Err(lib_failure(e)),
    }
}

fn check<M: MechanicalSystem>(run: &Run, rp: &ReducedProblem<M>, lq: bool) -> Result<(), Failure> {
    let w = run.cfg.initial_state()?;
    let icfg = run.cfg.integrator()?;
    let results = checks::run(rp, &w, &icfg, run.seed, lq);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::new(1, format!("{failed} of {} checks failed", results.len())))
    }
}

fn dispatch<M: MechanicalSystem>(run: &Run, command: Command, sys: M, lq: bool) -> Result<(), Failure> {
    let rp = ReducedProblem::new(sys).map_err(lib_failure)?;
    match command {
        Command::Derive => derive(run, &rp),
        Command::Simulate => simulate(run, &rp),
        Command::Solve => solve(run, &rp),
        Command::Check => check(run, &rp, lq),
    }
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    let src = std::fs::read_to_string(&cli.config)
        .map_err(|e| Failure::new(2, format!("cannot read {}: {e}", cli.config.display())))?;
    let cfg = RunConfig::parse(&src).map_err(|e| Failure::new(2, format!("{}: {e}", cli.config.display())))?;
    cfg.validate_for(cli.command)?;
    let run = Run {
        output: cli.output.or_else(|| cfg.output.path.as_ref().map(PathBuf::from)),
        format: cli.format.unwrap_or(cfg.output.format),
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        cfg,
    };
    match run.cfg.build_system()? {
        BuiltSystem::RigidBody(s) => dispatch(&run, cli.command, s, false),
        BuiltSystem::PointMass(s) => dispatch(&run, cli.command, s, true),
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("quasicontrol: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
