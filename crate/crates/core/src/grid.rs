//! Uniform structured grids, boundary-condition tags and scalar fields.
//!
//! Row index `i` runs along y and is coupled by the left-multiplying axis
//! matrix `A_n`; column index `j` runs along x and is coupled by the
//! right-multiplying matrix `A_m`. Values are cell centred: entry `(i, j)`
//! sits at `x = (j + 1/2) dr`, `y = (i + 1/2) dr`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Periodic,
    /// Zero-gradient (ghost value mirrors the boundary cell).
    Neumann,
    /// Mirror about the boundary node. Explicit paths only.
    Symmetric,
}

impl BoundaryCondition {
    /// Whether the axis matrix is symmetric and therefore admits the
    /// orthogonal eigendecomposition used by the direct implicit solve.
    pub fn supports_direct_solve(self) -> bool {
        matches!(self, BoundaryCondition::Periodic | BoundaryCondition::Neumann)
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Symmetric => "symmetric",
        };
        f.write_str(s)
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" => Ok(BoundaryCondition::Periodic),
            "neumann" => Ok(BoundaryCondition::Neumann),
            "symmetric" => Ok(BoundaryCondition::Symmetric),
            other => Err(Error::validation("bc", format!("unknown boundary condition `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Rows (y axis).
    pub n: usize,
    /// Columns (x axis).
    pub m: usize,
    pub dr: f64,
    pub bc_y: BoundaryCondition,
    pub bc_x: BoundaryCondition,
}

impl Grid {
    pub fn new(
        n: usize,
        m: usize,
        dr: f64,
        bc_y: BoundaryCondition,
        bc_x: BoundaryCondition,
    ) -> Result<Self> {
        let grid = Grid { n, m, dr, bc_y, bc_x };
        grid.validate()?;
        Ok(grid)
    }

    /// Same boundary condition on both axes.
    pub fn square(size: usize, dr: f64, bc: BoundaryCondition) -> Result<Self> {
        Self::new(size, size, dr, bc, bc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidSize { size: self.n });
        }
        if self.m < 3 {
            return Err(Error::InvalidSize { size: self.m });
        }
        if !(self.dr > 0.0 && self.dr.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {}", self.dr)));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn dof(&self) -> usize {
        self.n * self.m
    }

    pub fn cell_area(&self) -> f64 {
        self.dr * self.dr
    }

    pub fn width(&self) -> f64 {
        self.m as f64 * self.dr
    }

    pub fn height(&self) -> f64 {
        self.n as f64 * self.dr
    }

    /// Cell-centre coordinates `(x, y)` of entry `(i, j)`.
    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        ((j as f64 + 0.5) * self.dr, (i as f64 + 0.5) * self.dr)
    }

    pub fn supports_direct_solve(&self) -> bool {
        self.bc_x.supports_direct_solve() && self.bc_y.supports_direct_solve()
    }
}

/// A scalar field on a [`Grid`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Array2<f64>,
    grid: Grid,
}

impl Field {
    pub fn new(grid: Grid, fill: f64) -> Self {
        Field {
            values: Array2::from_elem(grid.shape(), fill),
            grid,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::new(grid, 0.0)
    }

    pub fn from_values(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                found: values.dim(),
            });
        }
        Ok(Field { values, grid })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Field {
            values: Array2::from_shape_fn(grid.shape(), |(i, j)| f(i, j)),
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: self.values.mapv(f),
            grid: self.grid,
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_difference(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.shape() != other.grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.shape(),
                found: other.grid.shape(),
            });
        }
        Ok(())
    }
}

pub fn create_field(grid: Grid, fill: f64) -> Field {
    Field::new(grid, fill)
}

/// Root-mean-square difference `sqrt(sum (a - b)^2 / (n m))`.
pub fn l2_difference(a: &Field, b: &Field) -> Result<f64> {
    a.check_same_grid(b)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((sum / a.grid.dof() as f64).sqrt())
}

/// Integral of the field over the domain, `sum f_ij dr^2`.
pub fn total_mass(f: &Field) -> f64 {
    f.values.sum() * f.grid.cell_area()
}
