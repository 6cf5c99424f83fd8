use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::run::{Solver, Stepper};
use super::scenario::{build_scenario, Overrides, ScenarioName};
use crate::error::{Error, Result};
use crate::explicit::explicit_stability_limit;
use crate::splitting::SplittingPolicy;
use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtRule {
    Fixed(f64),
    /// Multiple of the explicit stability limit of each grid.
    FractionOfLimit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub size: usize,
    pub dof: usize,
    pub dt: f64,
    pub seconds_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Slope of `log(seconds_per_step)` against `log(dof)`.
    pub exponent: f64,
    pub intercept: f64,
}

/// Least-squares fit of `log y = exponent log x + intercept`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: points.len(),
        });
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::validation("points", "power-law fit needs positive values"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::validation("points", "all abscissae are equal"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Times `steps_per_size` steps on square grids of each size (operators and
/// bases built outside the timed region, one untimed warm-up step), median
/// of `repeats` runs.
pub fn scaling_benchmark(
    model: Model,
    solver: Solver,
    sizes: &[usize],
    steps_per_size: usize,
    dt_rule: DtRule,
    repeats: usize,
) -> Result<ScalingReport> {
    if sizes.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: sizes.len(),
        });
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("sizes", "must be strictly ascending"));
    }
    if steps_per_size == 0 {
        return Err(Error::validation("steps_per_size", "must be at least 1"));
    }
    let repeats = repeats.max(3);
    let name = match model {
        Model::AllenCahn => ScenarioName::AcSharpInterface,
        Model::CahnHilliard => ScenarioName::ChSquareInclusion,
    };
    let policy = SplittingPolicy::default();
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let probe = build_scenario(
            name,
            &Overrides {
                size: Some(size),
                ..Default::default()
            },
        )?;
        let dt = match dt_rule {
            DtRule::Fixed(dt) => dt,
            DtRule::FractionOfLimit(f) => f * explicit_stability_limit(model, probe.constants.gamma, probe.grid.dr),
        };
        let scenario = probe.with_t_final(dt * steps_per_size as f64);
        let stepper = Stepper::new(&scenario, solver, &policy)?;
        let phi0 = scenario.initial_field()?;
        std::hint::black_box(stepper.step(&phi0, dt, dt)?);
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let mut phi = phi0.clone();
            let start = Instant::now();
            for k in 1..=steps_per_size {
                phi = stepper.step(&phi, k as f64 * dt, dt)?;
            }
            times.push(start.elapsed().as_secs_f64() / steps_per_size as f64);
            std::hint::black_box(&phi);
        }
        rows.push(ScalingRow {
            size,
            dof: scenario.grid.dof(),
            dt,
            seconds_per_step: median(times),
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.dof as f64, r.seconds_per_step)).collect();
    let (exponent, intercept) = fit_power_law(&points)?;
    Ok(ScalingReport {
        rows,
        exponent,
        intercept,
    })
}
