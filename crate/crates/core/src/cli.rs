//! Command-line front end. Exit codes: 0 success, 1 runtime failure or an
//! unintended divergence, 2 usage or configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{
    conservation_check, gradient_stability_check, perturbation_stability_test, run_simulation, scaling_benchmark,
    DtRule, PerturbationOutcome, Solver,
};
use crate::explicit::explicit_stability_limit;
use crate::io::{
    load_config, prepare_output_dir, series_csv, write_outputs, write_stability_report, RunConfig, RunSummary,
    StabilityEntry, StabilityReport,
};
use crate::splitting::{phi_max_estimate, xi_critical, StableSide};
use crate::Model;

#[derive(Debug, Parser)]
#[command(name = "phasefield", version, about = "Allen-Cahn / Cahn-Hilliard phase-field solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write series, snapshots and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace an existing output directory.
        #[arg(long)]
        force: bool,
    },
    /// Perturbation and energy verdicts for each time step in a list.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        dt_list: Vec<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Per-step wall time against degrees of freedom.
    Bench {
        #[arg(long)]
        model: Model,
        #[arg(long)]
        solver: Solver,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Fixed time step; defaults to half the explicit limit (explicit)
        /// or 1e-3 (implicit).
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Explicit time-step limit and critical splitting weights.
    Limits {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Run { config, force } => run(config, force),
        Command::Stability { config, dt_list, force } => stability(config, &dt_list, force),
        Command::Bench {
            model,
            solver,
            sizes,
            steps,
            repeats,
            dt,
        } => bench(model, solver, &sizes, steps, repeats, dt),
        Command::Limits { config } => limits(config),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. }
        | Error::Parse { .. }
        | Error::InvalidSchedule(_)
        | Error::UnknownScenario(_)
        | Error::InvalidGrid(_)
        | Error::InvalidSize { .. }
        | Error::UnsupportedBoundary { .. }
        | Error::InsufficientData { .. } => 2,
        _ => 1,
    }
}

/// Rounds to 12 significant digits for display.
fn display(v: f64) -> String {
    format!("{v:.11e}").parse::<f64>().unwrap_or(v).to_string()
}

fn dt_limit(config: &RunConfig) -> Result<f64> {
    let grid = config.grid.grid()?;
    Ok(explicit_stability_limit(config.model, config.constants.gamma, grid.dr) / config.constants.mobility)
}

fn run(path: PathBuf, force: bool) -> Result<i32> {
    let config = load_config(&path)?;
    let scenario = config.to_scenario()?;
    let result = run_simulation(&scenario, config.solver, config.dt, &config.splitting, &config.recording)?;
    let summary = RunSummary {
        steps: result.steps,
        final_time: result.series.last().map_or(0.0, |r| r.time),
        diverged_at: result.diverged_at,
        gradient_stable: gradient_stability_check(&result.energies()),
        mass_drift: conservation_check(&result.masses()),
        verdict: None,
        max_growth: None,
    };
    write_outputs(&result, &config, &summary, force)?;
    println!(
        "{} {} dt = {}: {} steps, final F = {}, mass drift = {:e}, energy monotone = {}",
        config.model,
        config.solver,
        display(config.dt),
        summary.steps,
        result.series.last().map_or(f64::NAN, |r| r.free_energy),
        summary.mass_drift,
        summary.gradient_stable
    );
    println!("wrote {}", config.output_dir.display());
    if let Some(k) = result.diverged_at {
        eprintln!("error: run diverged at step {k}");
        return Ok(1);
    }
    Ok(0)
}

fn stability(path: PathBuf, dt_list: &[f64], force: bool) -> Result<i32> {
    let config = load_config(&path)?;
    if let Some(dt) = dt_list.iter().find(|dt| !(**dt > 0.0 && dt.is_finite())) {
        return Err(Error::validation("dt-list", format!("time steps must be positive, got {dt}")));
    }
    let scenario = config.to_scenario()?;
    let spec = crate::experiments::PerturbationSpec {
        seed: config.seed,
        ..config.perturbation
    };
    let outcomes: Vec<Result<PerturbationOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = dt_list
            .iter()
            .map(|&dt| {
                let (scenario, spec, policy) = (&scenario, &spec, &config.splitting);
                s.spawn(move || perturbation_stability_test(scenario, config.solver, dt, policy, spec))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let dt_cri = dt_limit(&config)?;
    println!("{} {}  dt_cri = {}", config.model, config.solver, display(dt_cri));
    println!("{:>14} {:>10} {:>10} {:>14} {:>10} {:>10}", "dt", "dt/dt_cri", "verdict", "max growth", "monotone F", "diverged");
    let mut runs = Vec::new();
    let mut files = BTreeMap::new();
    for (&dt, outcome) in dt_list.iter().zip(outcomes) {
        let o = outcome?;
        let monotone = gradient_stability_check(&o.energies());
        let name = format!("series_dt{dt}.csv");
        println!(
            "{:>14} {:>10} {:>10} {:>14.4e} {:>10} {:>10}",
            display(dt),
            display(dt / dt_cri),
            o.verdict,
            o.max_growth,
            monotone,
            o.diverged_at.map_or("-".to_string(), |k| k.to_string())
        );
        files.insert(name.clone(), series_csv(&o.series));
        runs.push(StabilityEntry {
            dt,
            verdict: o.verdict,
            max_growth: o.max_growth,
            gradient_stable: monotone,
            steps: o.steps,
            diverged_at: o.diverged_at,
            halted_at: o.halted_at,
            series_file: name,
        });
    }
    prepare_output_dir(&config.output_dir, force)?;
    let report = StabilityReport { config, dt_cri, runs };
    let written = write_stability_report(&report.config.output_dir, &report, &files)?;
    println!("wrote {}", written.display());
    Ok(0)
}

fn bench(model: Model, solver: Solver, sizes: &[usize], steps: usize, repeats: usize, dt: Option<f64>) -> Result<i32> {
    let rule = match (dt, solver) {
        (Some(dt), _) => DtRule::Fixed(dt),
        (None, Solver::Explicit) => DtRule::FractionOfLimit(0.5),
        (None, Solver::Implicit) => DtRule::Fixed(1e-3),
    };
    let report = scaling_benchmark(model, solver, sizes, steps, rule, repeats)?;
    println!("{:>6} {:>10} {:>14} {:>16}", "N", "DoF", "dt", "seconds/step");
    for r in &report.rows {
        println!("{:>6} {:>10} {:>14.6e} {:>16.6e}", r.size, r.dof, r.dt, r.seconds_per_step);
    }
    println!("fitted exponent = {:.3}", report.exponent);
    Ok(0)
}

fn limits(path: PathBuf) -> Result<i32> {
    let config = load_config(&path)?;
    let scenario = config.to_scenario()?;
    let dt_cri = dt_limit(&config)?;
    println!("model = {}, dr = {}, gamma = {}", config.model, display(scenario.grid.dr), config.constants.gamma);
    println!("dt_cri = {}", display(dt_cri));
    let phi_max = phi_max_estimate(&scenario.initial_field()?, &config.splitting);
    println!("phi_max = {} (initial field)", display(phi_max));
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for row in scenario.schedule.rows() {
        let mut parts = Vec::new();
        for (id, p) in &row.values {
            match xi_critical(p.t, phi_max) {
                Ok((xi, side)) => {
                    range = (range.0.min(xi), range.1.max(xi));
                    let op = if side == StableSide::AtLeast { ">=" } else { "<=" };
                    parts.push(format!("region {id}: T = {} xi {op} {}", p.t, display(xi)));
                }
                Err(_) => parts.push(format!("region {id}: T = 0 (any xi)")),
            }
        }
        println!("  ({}, {}]  {}", row.t_begin, row.t_end, parts.join("; "));
    }
    if range.0.is_finite() {
        println!("xi_cri range = [{}, {}]", display(range.0), display(range.1));
    }
    Ok(0)
}
