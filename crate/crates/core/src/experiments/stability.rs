use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::{step_count, step_time, SeriesRecord, Solver, Stepper};
use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::explicit::is_diverged;
use crate::grid::{l2_difference, Field};
use crate::splitting::SplittingPolicy;

/// Relative slack allowed per step by [`gradient_stability_check`].
pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Half-width of the uniform per-node perturbation.
    pub magnitude: f64,
    pub seed: u64,
    /// Stable only if the difference norm never exceeds this multiple of its
    /// initial value.
    pub growth_threshold: f64,
    /// Stop early once the norm exceeds this multiple of its initial value.
    pub blowup_threshold: f64,
    /// Keep every this many steps in the returned series.
    pub record_stride: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            magnitude: 1e-6,
            seed: 0,
            growth_threshold: 2.0,
            blowup_threshold: 1e3,
            record_stride: 1,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::validation(
                "perturbation.magnitude",
                format!("must be >= 0, got {}", self.magnitude),
            ));
        }
        if !(self.growth_threshold >= 1.0) {
            return Err(Error::validation("perturbation.growth_threshold", "must be >= 1"));
        }
        if !(self.blowup_threshold >= self.growth_threshold) {
            return Err(Error::validation(
                "perturbation.blowup_threshold",
                "must be at least the growth threshold",
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::validation("perturbation.record_stride", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationOutcome {
    /// Unperturbed trajectory, with the difference norm in `l2_perturbation`.
    pub series: Vec<SeriesRecord>,
    pub verdict: Verdict,
    pub initial_norm: f64,
    /// Largest `norm / initial_norm` seen.
    pub max_growth: f64,
    pub diverged_at: Option<usize>,
    /// Step at which the blow-up threshold stopped the run.
    pub halted_at: Option<usize>,
    pub steps: usize,
}

impl PerturbationOutcome {
    pub fn norms(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.l2_perturbation.unwrap_or(0.0)).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.series.iter().map(|r| r.free_energy).collect()
    }
}

/// Adds i.i.d. uniform noise in `[-magnitude, magnitude]` to every node.
pub fn perturb(phi: &Field, magnitude: f64, seed: u64) -> Field {
    if magnitude == 0.0 {
        return phi.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(*phi.grid(), |i, j| phi.get(i, j) + rng.random_range(-magnitude..=magnitude))
}

/// Advances a trajectory and a perturbed copy in lockstep and classifies the
/// growth of their RMS difference.
pub fn perturbation_stability_test(
    scenario: &Scenario,
    solver: Solver,
    dt: f64,
    policy: &SplittingPolicy,
    spec: &PerturbationSpec,
) -> Result<PerturbationOutcome> {
    spec.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", format!("must be positive and finite, got {dt}")));
    }
    let stepper = Stepper::new(scenario, solver, policy)?;
    let t_final = scenario.t_final;
    let steps = step_count(t_final, dt);

    let mut a = scenario.initial_field()?;
    let mut b = perturb(&a, spec.magnitude, spec.seed);
    let n0 = l2_difference(&a, &b)?;
    let exceeds = |norm: f64, factor: f64| if n0 > 0.0 { norm > factor * n0 } else { norm > 0.0 };

    let mut series = vec![stepper.record(0, 0.0, &a, Some(n0))?];
    let (mut diverged_at, mut halted_at) = (None, None);
    let mut max_growth: f64 = if n0 > 0.0 { 1.0 } else { 0.0 };
    let mut growth_exceeded = false;
    let mut taken = 0;
    for k in 1..=steps {
        let (t0, t1) = (step_time(k - 1, dt, t_final), step_time(k, dt, t_final));
        a = stepper.step(&a, t1, t1 - t0)?;
        b = stepper.step(&b, t1, t1 - t0)?;
        taken = k;
        let diverged = is_diverged(&a) || is_diverged(&b);
        let norm = l2_difference(&a, &b)?;
        let norm = if norm.is_finite() { norm } else { f64::INFINITY };
        if n0 > 0.0 {
            max_growth = max_growth.max(norm / n0);
        } else if norm > 0.0 {
            max_growth = f64::INFINITY;
        }
        growth_exceeded |= exceeds(norm, spec.growth_threshold);
        let blown = exceeds(norm, spec.blowup_threshold);
        if diverged || blown || k % spec.record_stride == 0 || k == steps {
            series.push(stepper.record(k, t1, &a, Some(norm))?);
        }
        if diverged {
            diverged_at = Some(k);
            break;
        }
        if blown {
            halted_at = Some(k);
            break;
        }
    }
    let verdict = if diverged_at.is_some() || growth_exceeded {
        Verdict::Unstable
    } else {
        Verdict::Stable
    };
    Ok(PerturbationOutcome {
        series,
        verdict,
        initial_norm: n0,
        max_growth,
        diverged_at,
        halted_at,
        steps: taken,
    })
}

/// True when the energy never rises by more than `1e-9 |F_k|` between
/// consecutive samples.
pub fn gradient_stability_check(energy_series: &[f64]) -> bool {
    energy_series.iter().all(|e| e.is_finite())
        && energy_series
            .windows(2)
            .all(|w| w[1] <= w[0] + ENERGY_TOLERANCE * w[0].abs())
}

/// Largest relative mass drift `|m_k - m_0| / |m_0|`; absolute drift when
/// `m_0 = 0`.
pub fn conservation_check(mass_series: &[f64]) -> f64 {
    let Some(&m0) = mass_series.first() else {
        return 0.0;
    };
    let drift = mass_series.iter().fold(0.0_f64, |acc, m| acc.max((m - m0).abs()));
    if m0 == 0.0 {
        drift
    } else {
        drift / m0.abs()
    }
}
