use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::energy::{total_free_energy_with, Landau};
use crate::error::{Error, Result};
use crate::explicit::{is_diverged, ExplicitSolver, StepInputs};
use crate::grid::{total_mass, Field};
use crate::implicit::ImplicitSolver;
use crate::schedule::ScheduleRow;
use crate::spectral::LaplacianOperator;
use crate::splitting::{xi_field, SplittingPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Explicit,
    Implicit,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Explicit => "explicit",
            Solver::Implicit => "implicit",
        })
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "explicit" => Ok(Solver::Explicit),
            "implicit" => Ok(Solver::Implicit),
            other => Err(Error::validation("solver", format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordingSpec {
    /// Record the series every this many steps (the last step is always
    /// recorded).
    pub series_stride: usize,
    pub snapshot_times: Vec<f64>,
}

impl Default for RecordingSpec {
    fn default() -> Self {
        RecordingSpec {
            series_stride: 1,
            snapshot_times: Vec::new(),
        }
    }
}

impl RecordingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.series_stride == 0 {
            return Err(Error::validation("recording.series_stride", "must be at least 1"));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::validation(
                "recording.snapshot_times",
                format!("times must be non-negative, got {t}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub step: usize,
    pub time: f64,
    pub free_energy: f64,
    pub mass: f64,
    pub l2_perturbation: Option<f64>,
    pub max_abs_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub series: Vec<SeriesRecord>,
    pub snapshots: Vec<Snapshot>,
    pub diverged_at: Option<usize>,
    pub steps: usize,
    pub final_field: Field,
}

impl RunResult {
    pub fn energies(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.free_energy).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.mass).collect()
    }
}

/// Number of fixed steps of size `dt` needed to reach `t_final`; a final
/// partial step is shortened to land on `t_final`.
pub fn step_count(t_final: f64, dt: f64) -> usize {
    let k = t_final / dt;
    let rounded = k.round();
    if (k - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded.max(1.0) as usize
    } else {
        k.ceil() as usize
    }
}

enum Engine {
    Explicit(ExplicitSolver),
    Implicit(Box<ImplicitSolver>),
}

/// Scenario-bound stepper: prebuilt operators plus cached parameter fields.
pub struct Stepper<'a> {
    scenario: &'a Scenario,
    engine: Engine,
    policy: SplittingPolicy,
    cache: std::cell::RefCell<Option<(*const ScheduleRow, Field, Field)>>,
}

impl<'a> Stepper<'a> {
    /// Checks the configuration and builds operators (and eigenbases for the
    /// implicit solver).
    pub fn new(scenario: &'a Scenario, solver: Solver, policy: &SplittingPolicy) -> Result<Self> {
        scenario.validate()?;
        policy.validate()?;
        let engine = match solver {
            Solver::Explicit => Engine::Explicit(ExplicitSolver::new(LaplacianOperator::new(&scenario.grid)?)),
            Solver::Implicit => {
                if !scenario.grid.supports_direct_solve() {
                    return Err(Error::Unsupported(format!(
                        "implicit solver needs periodic or Neumann boundaries, got {} (rows) / {} (columns)",
                        scenario.grid.bc_y, scenario.grid.bc_x
                    )));
                }
                Engine::Implicit(Box::new(ImplicitSolver::new(&scenario.grid)?))
            }
        };
        Ok(Stepper {
            scenario,
            engine,
            policy: *policy,
            cache: std::cell::RefCell::new(None),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    /// `(T, h)` at time `t`.
    pub fn parameters(&self, t: f64) -> Result<(Field, Field)> {
        let t = t.min(self.scenario.t_final);
        let row = self.scenario.schedule.row_at(t)? as *const ScheduleRow;
        let mut cache = self.cache.borrow_mut();
        if let Some((cached, tf, hf)) = cache.as_ref() {
            if *cached == row {
                return Ok((tf.clone(), hf.clone()));
            }
        }
        let (tf, hf) = self.scenario.schedule.evaluate(t, &self.scenario.grid)?;
        *cache = Some((row, tf.clone(), hf.clone()));
        Ok((tf, hf))
    }

    /// One step from `phi` over `dt`, with parameters taken at `t_end`.
    pub fn step(&self, phi: &Field, t_end: f64, dt: f64) -> Result<Field> {
        let (t, h) = self.parameters(t_end)?;
        let c = &self.scenario.constants;
        match &self.engine {
            Engine::Explicit(s) => s.step(
                self.scenario.model,
                &StepInputs {
                    phi,
                    t: &t,
                    h: &h,
                    constants: c,
                    dt,
                },
            ),
            Engine::Implicit(s) => {
                let xi = xi_field(&t, phi, &self.policy)?;
                s.step(self.scenario.model, phi, &t, &h, &xi, c, dt)
            }
        }
    }

    /// Total free energy of `phi` with the parameters active at `time`.
    pub fn free_energy(&self, phi: &Field, time: f64) -> Result<f64> {
        let (t, h) = self.parameters(time)?;
        Ok(total_free_energy_with(&Landau, phi, &t, &h, self.scenario.constants.gamma))
    }

    pub fn record(&self, step: usize, time: f64, phi: &Field, l2: Option<f64>) -> Result<SeriesRecord> {
        Ok(SeriesRecord {
            step,
            time,
            free_energy: self.free_energy(phi, time)?,
            mass: total_mass(phi),
            l2_perturbation: l2,
            max_abs_phi: phi.max_abs(),
        })
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::validation("dt", format!("must be positive and finite, got {dt}")))
    }
}

/// Time after `k` steps of size `dt`, clamped to `t_final`.
pub fn step_time(k: usize, dt: f64, t_final: f64) -> f64 {
    (k as f64 * dt).min(t_final)
}

/// Advances the scenario's initial condition to `t_final` with fixed steps.
pub fn run_simulation(
    scenario: &Scenario,
    solver: Solver,
    dt: f64,
    policy: &SplittingPolicy,
    record: &RecordingSpec,
) -> Result<RunResult> {
    check_dt(dt)?;
    record.validate()?;
    let stepper = Stepper::new(scenario, solver, policy)?;
    let phi0 = scenario.initial_field()?;
    run_from(&stepper, phi0, dt, record)
}

/// As [`run_simulation`] from an explicit starting field.
pub fn run_from(stepper: &Stepper<'_>, phi0: Field, dt: f64, record: &RecordingSpec) -> Result<RunResult> {
    check_dt(dt)?;
    record.validate()?;
    let t_final = stepper.scenario().t_final;
    let steps = step_count(t_final, dt);
    let mut snapshot_times: Vec<f64> = record.snapshot_times.clone();
    snapshot_times.sort_by(f64::total_cmp);
    snapshot_times.dedup();
    let mut pending = snapshot_times.into_iter().peekable();
    let mut snapshots = Vec::new();
    let snap_tol = 1e-9 * dt;

    let mut phi = phi0;
    let mut series = vec![stepper.record(0, 0.0, &phi, None)?];
    while pending.peek().is_some_and(|&ts| ts <= snap_tol) {
        pending.next();
        snapshots.push(Snapshot {
            step: 0,
            time: 0.0,
            field: phi.clone(),
        });
    }
    let mut diverged_at = None;
    let mut taken = 0;
    for k in 1..=steps {
        let (t0, t1) = (step_time(k - 1, dt, t_final), step_time(k, dt, t_final));
        phi = stepper.step(&phi, t1, t1 - t0)?;
        taken = k;
        let diverged = is_diverged(&phi);
        if diverged || k % record.series_stride == 0 || k == steps {
            series.push(stepper.record(k, t1, &phi, None)?);
        }
        while pending.peek().is_some_and(|&ts| ts <= t1 + snap_tol) {
            pending.next();
            snapshots.push(Snapshot {
                step: k,
                time: t1,
                field: phi.clone(),
            });
        }
        if diverged {
            diverged_at = Some(k);
            break;
        }
    }
    Ok(RunResult {
        series,
        snapshots,
        diverged_at,
        steps: taken,
        final_field: phi,
    })
}

/// Runs until the per-step change `max |phi_{k+1} - phi_k|` drops below
/// `tolerance` or `max_steps` is reached. Parameters are held at their
/// `t = 0` values. Returns the final field and the steps taken.
pub fn run_to_steady_state(
    stepper: &Stepper<'_>,
    phi0: Field,
    dt: f64,
    tolerance: f64,
    max_steps: usize,
) -> Result<(Field, usize)> {
    check_dt(dt)?;
    let mut phi = phi0;
    for k in 1..=max_steps {
        let next = stepper.step(&phi, 0.0, dt)?;
        if is_diverged(&next) {
            return Err(Error::Unsupported(format!("trajectory diverged at step {k}")));
        }
        let change = next.max_abs_difference(&phi)?;
        phi = next;
        if change < tolerance {
            return Ok((phi, k));
        }
    }
    Ok((phi, max_steps))
}
