mod args;
mod check;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use nonlocal_optim::experiments::{reproduce_figure, run_experiment, ExperimentOutcome, Mode};
use nonlocal_optim::Error;

use args::{Cli, Command, ExperimentArgs};
use config::{load_config, solver_config, FileConfig};

const THREADS_VAR: &str = "NONLOCAL_OPTIM_THREADS";

enum Failure {
    Usage { message: String, command: &'static str },
    NotConverged(String),
    Diverged(String),
    Other(String),
}

impl Failure {
    fn from_core(e: Error, command: &'static str) -> Self {
        match e {
            Error::Diverged { .. } => Self::Diverged(e.to_string()),
            Error::InvalidConfig(message) => Self::Usage { message, command },
            other => Self::Other(other.to_string()),
        }
    }

    fn report(self) -> ExitCode {
        match self {
            Self::Usage { message, command } => {
                eprintln!("error: {message}");
                eprintln!("hint: see 'nonlocal-optim {command} --help'");
                ExitCode::from(1)
            }
            Self::NotConverged(message) => {
                eprintln!("error: {message}");
                ExitCode::from(2)
            }
            Self::Diverged(message) => {
                eprintln!("error: {message}");
                ExitCode::from(3)
            }
            Self::Other(message) => {
                eprintln!("error: {message}");
                ExitCode::from(1)
            }
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let usage = |message: String| Failure::Usage { message, command: "" };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Other(e.to_string()))
}

fn print_outcome(out: &ExperimentOutcome<f64>) {
    if let Some(d) = &out.discrete {
        if let Some(last) = d.last() {
            println!(
                "discrete: k = {}, theta = {:?}, loss = {:.6e}",
                last.k,
                last.theta.as_slice(),
                last.loss
            );
        }
    }
    if let Some(c) = &out.continuous {
        let s = &c.solve;
        println!(
            "continuous: converged = {}, outer iterations = {}, final error = {:.3e}, smoothing = {}",
            s.converged, s.outer_iterations, s.final_error, s.final_smoothing
        );
        if let Some(last) = c.trajectory.last() {
            println!(
                "continuous: k = {}, theta = {:?}, loss = {:.6e}",
                last.k,
                last.theta.as_slice(),
                last.loss
            );
        }
    }
    if let Some(r) = &out.comparison {
        for s in &r.series {
            println!(
                "compare {}: max |diff| = {:.6e} at k = {}, rmse = {:.6e}",
                s.name, s.max_abs_diff, s.argmax_k, s.rmse
            );
        }
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
}

fn experiment(args: &ExperimentArgs, mode: Mode, command: &'static str) -> Result<(), Failure> {
    let usage = |message: String| Failure::Usage { message, command };
    let spec = load_config(args.config.as_deref(), args, mode).map_err(usage)?;
    let out = run_experiment(&spec).map_err(|e| Failure::from_core(e, command))?;
    print_outcome(&out);
    match &out.continuous {
        Some(c) if !c.solve.converged => Err(Failure::NotConverged(format!(
            "solver stopped after {} outer iterations with global error {:.3e} > tolerance {:.3e}",
            c.solve.outer_iterations, c.solve.final_error, spec.solver.tolerance
        ))),
        _ => Ok(()),
    }
}

fn figure(n: u8, out: &Path, solver: &args::SolverArgs) -> Result<(), Failure> {
    let command = "reproduce-figure";
    let solver =
        solver_config(solver, &FileConfig::default()).map_err(|message| Failure::Usage { message, command })?;
    let result = reproduce_figure(n, out, &solver).map_err(|e| Failure::from_core(e, command))?;
    for o in &result.outcomes {
        for f in &o.files {
            println!("wrote {}", f.display());
        }
    }
    for svg in &result.svgs {
        println!("wrote {}", svg.display());
    }
    if result.unconverged > 0 {
        return Err(Failure::NotConverged(format!(
            "{} of {} continuous runs did not reach the tolerance",
            result.unconverged,
            result.outcomes.len()
        )));
    }
    Ok(())
}

fn check() -> Result<(), Failure> {
    let results = check::run_checks();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Other(format!("{failed} check(s) failed")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Discrete(a) => experiment(a, Mode::Discrete, "discrete"),
        Command::Continuous(a) => experiment(a, Mode::Continuous, "continuous"),
        Command::Compare(a) => experiment(a, Mode::Both, "compare"),
        Command::ReproduceFigure { figure: n, out, solver } => figure(*n, out, solver),
        Command::Check => check(),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
