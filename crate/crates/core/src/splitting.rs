//! Critical splitting weight for the convex/concave split of the `T phi^2`
//! term, and the per-cell `xi` fields fed to the implicit schemes.
//!
//! The expansive (explicit) part is `xi T phi^2 + phi^4 + h phi`; the
//! contractive (implicit) part is `(1 - xi) T phi^2 + gamma/2 |grad phi|^2`.
//! Gradient stability requires
//!
//! ```text
//! xi >= (T - 12 phi_max^2) / (2T)   if T < 0
//! xi <= -6 phi_max^2 / T            if T > 0
//! ```
//!
//! equivalently, the implicit coefficient `(1 - xi) T` is at least
//! `(T + 12 phi_max^2) / 2` (T < 0) or `T + 6 phi_max^2` (T > 0).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingMode {
    /// Per-cell critical weight.
    Literal,
    /// Per-cell weight tuned so that `(1 - xi) T` is spatially uniform.
    UniformCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplittingPolicy {
    /// Multiplies the current `max |phi|`; must be at least 1.
    pub safety_factor: f64,
    /// Added beyond the critical weight in the stable direction.
    pub margin: f64,
    /// Weight used where `T = 0` (any value is stable there).
    pub xi_at_zero_t: f64,
    pub mode: SplittingMode,
    /// Also require the implicit part to be convex, `(1 - xi) T >= 0`.
    /// Only binds when `T < 0` and `phi_max^2 < |T| / 12`.
    pub convex_implicit: bool,
}

impl Default for SplittingPolicy {
    fn default() -> Self {
        SplittingPolicy {
            safety_factor: 1.0,
            margin: 0.0,
            xi_at_zero_t: 1.0,
            mode: SplittingMode::Literal,
            convex_implicit: true,
        }
    }
}

impl SplittingPolicy {
    pub fn uniform_coefficient() -> Self {
        SplittingPolicy {
            mode: SplittingMode::UniformCoefficient,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.safety_factor >= 1.0 && self.safety_factor.is_finite()) {
            return Err(Error::validation(
                "splitting.safety_factor",
                format!("must be >= 1, got {}", self.safety_factor),
            ));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::validation("splitting.margin", format!("must be >= 0, got {}", self.margin)));
        }
        if !self.xi_at_zero_t.is_finite() {
            return Err(Error::validation("splitting.xi_at_zero_t", "must be finite"));
        }
        Ok(())
    }
}

/// Which side of the critical value is stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StableSide {
    AtLeast,
    AtMost,
}

impl StableSide {
    pub fn admits(self, xi: f64, critical: f64) -> bool {
        match self {
            StableSide::AtLeast => xi >= critical,
            StableSide::AtMost => xi <= critical,
        }
    }
}

pub fn phi_max_estimate(f: &Field, policy: &SplittingPolicy) -> f64 {
    policy.safety_factor * f.max_abs()
}

pub fn xi_critical(t: f64, phi_max: f64) -> Result<(f64, StableSide)> {
    let p2 = phi_max * phi_max;
    if t < 0.0 {
        Ok(((t - 12.0 * p2) / (2.0 * t), StableSide::AtLeast))
    } else if t > 0.0 {
        Ok((-6.0 * p2 / t, StableSide::AtMost))
    } else {
        Err(Error::DegenerateTemperature)
    }
}

/// Smallest admissible implicit coefficient `(1 - xi) T` for one cell.
pub fn implicit_coefficient_bound(t: f64, phi_max: f64) -> f64 {
    let p2 = phi_max * phi_max;
    if t < 0.0 {
        0.5 * (t + 12.0 * p2)
    } else {
        t + 6.0 * p2
    }
}

fn literal_xi(t: f64, phi_max: f64, policy: &SplittingPolicy) -> f64 {
    match xi_critical(t, phi_max) {
        Ok((xi, StableSide::AtLeast)) => {
            let xi = if policy.convex_implicit { xi.max(1.0) } else { xi };
            xi + policy.margin
        }
        Ok((xi, StableSide::AtMost)) => xi - policy.margin,
        Err(_) => policy.xi_at_zero_t,
    }
}

/// Per-cell splitting weight for the temperature field `t` and current `phi`.
pub fn xi_field(t: &Field, phi: &Field, policy: &SplittingPolicy) -> Result<Field> {
    t.check_same_grid(phi)?;
    let phi_max = phi_max_estimate(phi, policy);
    match policy.mode {
        SplittingMode::Literal => Ok(t.map(|tv| literal_xi(tv, phi_max, policy))),
        SplittingMode::UniformCoefficient => {
            if t.values().iter().any(|&tv| tv == 0.0) {
                return Err(Error::Unsupported(
                    "uniform-coefficient splitting needs T != 0 in every cell".into(),
                ));
            }
            let c = t
                .values()
                .iter()
                .map(|&tv| {
                    let bound = implicit_coefficient_bound(tv, phi_max);
                    let bound = if policy.convex_implicit { bound.max(0.0) } else { bound };
                    bound + policy.margin * tv.abs()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(t.map(|tv| 1.0 - c / tv))
        }
    }
}
