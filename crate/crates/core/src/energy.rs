//! Bulk free-energy density, chemical potential and the discrete total
//! Ginzburg-Landau free energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, Field};
use crate::spectral::LaplacianOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Gradient energy coefficient.
    pub gamma: f64,
    #[serde(default = "default_mobility")]
    pub mobility: f64,
}

fn default_mobility() -> f64 {
    1.0
}

impl PhysicalConstants {
    pub fn new(gamma: f64, mobility: f64) -> Result<Self> {
        let c = PhysicalConstants { gamma, mobility };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::validation("constants.gamma", format!("must be positive, got {}", self.gamma)));
        }
        if !(self.mobility > 0.0 && self.mobility.is_finite()) {
            return Err(Error::validation(
                "constants.mobility",
                format!("must be positive, got {}", self.mobility),
            ));
        }
        Ok(())
    }
}

/// Local free-energy density `f(phi; T, h)`.
pub trait FreeEnergyDensity: Send + Sync {
    fn value(&self, phi: f64, t: f64, h: f64) -> f64;
    fn derivative(&self, phi: f64, t: f64, h: f64) -> f64;
}

/// `phi^4 + T phi^2 + h phi`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Landau;

impl FreeEnergyDensity for Landau {
    #[inline]
    fn value(&self, phi: f64, t: f64, h: f64) -> f64 {
        bulk_energy_density(phi, t, h)
    }

    #[inline]
    fn derivative(&self, phi: f64, t: f64, h: f64) -> f64 {
        bulk_energy_derivative(phi, t, h)
    }
}

#[inline]
pub fn bulk_energy_density(phi: f64, t: f64, h: f64) -> f64 {
    let p2 = phi * phi;
    p2 * p2 + t * p2 + h * phi
}

#[inline]
pub fn bulk_energy_derivative(phi: f64, t: f64, h: f64) -> f64 {
    4.0 * phi * phi * phi + 2.0 * t * phi + h
}

fn check_grids(phi: &Field, t: &Field, h: &Field) -> Result<()> {
    phi.check_same_grid(t)?;
    phi.check_same_grid(h)
}

/// `mu = f'(phi) - gamma lap(phi)`.
pub fn chemical_potential(phi: &Field, t: &Field, h: &Field, constants: &PhysicalConstants) -> Result<Field> {
    check_grids(phi, t, h)?;
    let op = LaplacianOperator::new(phi.grid())?;
    Ok(chemical_potential_with(&op, &Landau, phi, t, h, constants.gamma))
}

pub fn chemical_potential_with(
    op: &LaplacianOperator,
    density: &dyn FreeEnergyDensity,
    phi: &Field,
    t: &Field,
    h: &Field,
    gamma: f64,
) -> Field {
    let mut mu = op.apply(phi);
    ndarray::Zip::from(mu.values_mut())
        .and(phi.values())
        .and(t.values())
        .and(h.values())
        .for_each(|m, &p, &tv, &hv| *m = density.derivative(p, tv, hv) - gamma * *m);
    mu
}

/// Discrete `F = sum [f(phi) + gamma/2 |grad phi|^2] dr^2`.
///
/// The gradient term sums squared differences across every grid edge the
/// boundary condition couples: interior neighbours, plus the wrap-around edge
/// on periodic axes. Its variational derivative is exactly `-gamma` times the
/// five-point Laplacian, which makes it the energy the splitting scheme
/// decreases.
pub fn total_free_energy(phi: &Field, t: &Field, h: &Field, constants: &PhysicalConstants) -> Result<f64> {
    check_grids(phi, t, h)?;
    Ok(total_free_energy_with(&Landau, phi, t, h, constants.gamma))
}

pub fn total_free_energy_with(
    density: &dyn FreeEnergyDensity,
    phi: &Field,
    t: &Field,
    h: &Field,
    gamma: f64,
) -> f64 {
    let grid = phi.grid();
    let bulk: f64 = ndarray::Zip::from(phi.values())
        .and(t.values())
        .and(h.values())
        .fold(0.0, |acc, &p, &tv, &hv| acc + density.value(p, tv, hv));
    bulk * grid.cell_area() + 0.5 * gamma * gradient_edge_sum(phi)
}

/// `sum over coupled edges of (phi_a - phi_b)^2`, i.e. `|grad phi|^2 dr^2` summed.
pub fn gradient_edge_sum(phi: &Field) -> f64 {
    let grid = phi.grid();
    let (n, m) = grid.shape();
    let u = phi.values();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..m {
            let v = u[[i, j]];
            if j + 1 < m {
                let d = u[[i, j + 1]] - v;
                sum += d * d;
            } else if grid.bc_x == BoundaryCondition::Periodic {
                let d = u[[i, 0]] - v;
                sum += d * d;
            }
            if i + 1 < n {
                let d = u[[i + 1, j]] - v;
                sum += d * d;
            } else if grid.bc_y == BoundaryCondition::Periodic {
                let d = u[[0, j]] - v;
                sum += d * d;
            }
        }
    }
    sum
}
