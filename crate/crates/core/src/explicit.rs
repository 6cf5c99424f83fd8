//! Forward-Euler steps for Allen-Cahn and Cahn-Hilliard, and the von
//! Neumann time-step limits of those steps.

use crate::energy::{chemical_potential_with, FreeEnergyDensity, Landau, PhysicalConstants};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::spectral::LaplacianOperator;
use crate::Model;

/// A trajectory is declared diverged once any value exceeds this magnitude.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub phi: &'a Field,
    pub t: &'a Field,
    pub h: &'a Field,
    pub constants: &'a PhysicalConstants,
    pub dt: f64,
}

impl StepInputs<'_> {
    pub(crate) fn validate(&self) -> Result<()> {
        self.phi.check_same_grid(self.t)?;
        self.phi.check_same_grid(self.h)?;
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be non-negative and finite, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Non-finite values or magnitudes beyond [`DIVERGENCE_BOUND`].
pub fn is_diverged(f: &Field) -> bool {
    f.values().iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND))
}

/// Explicit stepper with its Laplacian prebuilt for one grid.
pub struct ExplicitSolver {
    op: LaplacianOperator,
    density: Box<dyn FreeEnergyDensity>,
}

impl ExplicitSolver {
    pub fn new(op: LaplacianOperator) -> Self {
        Self::with_density(op, Box::new(Landau))
    }

    pub fn with_density(op: LaplacianOperator, density: Box<dyn FreeEnergyDensity>) -> Self {
        ExplicitSolver { op, density }
    }

    pub fn operator(&self) -> &LaplacianOperator {
        &self.op
    }

    pub fn step(&self, model: Model, inputs: &StepInputs<'_>) -> Result<Field> {
        match model {
            Model::AllenCahn => self.ac_step(inputs),
            Model::CahnHilliard => self.ch_step(inputs),
        }
    }

    /// `phi + dt (-M mu)`.
    pub fn ac_step(&self, inputs: &StepInputs<'_>) -> Result<Field> {
        inputs.validate()?;
        let mu = chemical_potential_with(&self.op, &*self.density, inputs.phi, inputs.t, inputs.h, inputs.constants.gamma);
        let rate = -inputs.constants.mobility * inputs.dt;
        let mut next = inputs.phi.clone();
        next.values_mut().scaled_add(rate, mu.values());
        Ok(next)
    }

    /// `phi + M dt lap(mu)`.
    pub fn ch_step(&self, inputs: &StepInputs<'_>) -> Result<Field> {
        inputs.validate()?;
        let mu = chemical_potential_with(&self.op, &*self.density, inputs.phi, inputs.t, inputs.h, inputs.constants.gamma);
        let flux = self.op.apply_values(mu.values());
        let rate = inputs.constants.mobility * inputs.dt;
        let mut next = inputs.phi.clone();
        next.values_mut().scaled_add(rate, &flux);
        Ok(next)
    }
}

pub fn explicit_ac_step(inputs: &StepInputs<'_>) -> Result<Field> {
    ExplicitSolver::new(LaplacianOperator::new(inputs.phi.grid())?).ac_step(inputs)
}

pub fn explicit_ch_step(inputs: &StepInputs<'_>) -> Result<Field> {
    ExplicitSolver::new(LaplacianOperator::new(inputs.phi.grid())?).ch_step(inputs)
}

/// Largest stable forward-Euler step for constant parameters:
/// `dr^2 / (4 gamma)` (AC) and `dr^2 / (4 + 32 gamma / dr^2)` (CH).
pub fn explicit_stability_limit(model: Model, gamma: f64, dr: f64) -> f64 {
    let dr2 = dr * dr;
    match model {
        Model::AllenCahn => dr2 / (4.0 * gamma),
        Model::CahnHilliard => dr2 / (4.0 + 32.0 * gamma / dr2),
    }
}
