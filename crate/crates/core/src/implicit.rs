//! Semi-implicit convex-splitting steps solved directly in the eigenbasis of
//! the axis Laplacians.
//!
//! Allen-Cahn (mobility folded into `dt`):
//!
//! ```text
//! (1 + eps) . phi' + eta lap(phi') = b
//! eps = 2 dt (1 - xi) T,  eta = -dt gamma,
//! b   = phi - 2 dt xi T phi - 4 dt phi^3 - h dt
//! ```
//!
//! Cahn-Hilliard:
//!
//! ```text
//! c0 . phi' + c2 . lap(phi') + c4 lap(lap(phi')) = b
//! c0 = 1 - 2 dt lap((1 - xi) T),  c2 = -2 dt (1 - xi) T,  c4 = gamma dt,
//! b  = phi + dt lap(2 xi T phi + 4 phi^3 + h)
//! ```
//!
//! Both are solved as `phi' = Q_n [ (Q_n^T b Q_m) ./ Omega ] Q_m^T` with
//! `Omega_ij` combining the coefficient at `(i, j)` with the eigenvalue sum
//! `s_ij = d_{n_i} + d_{m_j}`. When the coefficient fields are spatially
//! uniform this is the exact solution of the linear system; otherwise it is
//! the same index-wise combination, which [`dense_reference_step`] lets one
//! compare against the exact solve.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Zip};

use crate::energy::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::spectral::{LaplacianMatrix, LaplacianOperator, SpectralBases};
use crate::Model;

/// Smallest admissible `|Omega_ij|`.
pub const OMEGA_GUARD: f64 = 1e-14;

/// Largest system the dense reference solver will assemble.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct AcCoefficients {
    pub eps: Field,
    pub eta: f64,
    pub b: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChCoefficients {
    pub c0: Field,
    pub c2: Field,
    pub c4: f64,
    pub b: Field,
}

fn check_inputs(phi: &Field, t: &Field, h: &Field, xi: &Field, dt: f64) -> Result<()> {
    phi.check_same_grid(t)?;
    phi.check_same_grid(h)?;
    phi.check_same_grid(xi)?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::validation("dt", format!("must be non-negative and finite, got {dt}")));
    }
    Ok(())
}

pub fn assemble_ac_coefficients(
    phi: &Field,
    t: &Field,
    h: &Field,
    xi: &Field,
    constants: &PhysicalConstants,
    dt: f64,
) -> Result<AcCoefficients> {
    check_inputs(phi, t, h, xi, dt)?;
    let dt = constants.mobility * dt;
    let grid = *phi.grid();
    let mut eps = Array2::zeros(grid.shape());
    let mut b = Array2::zeros(grid.shape());
    Zip::from(&mut eps)
        .and(&mut b)
        .and(phi.values())
        .and(t.values())
        .and(h.values())
        .and(xi.values())
        .for_each(|e, bv, &p, &tv, &hv, &x| {
            *e = 2.0 * dt * (1.0 - x) * tv;
            *bv = p - 2.0 * dt * x * tv * p - 4.0 * dt * p * p * p - hv * dt;
        });
    Ok(AcCoefficients {
        eps: Field::from_values(grid, eps)?,
        eta: -dt * constants.gamma,
        b: Field::from_values(grid, b)?,
    })
}

pub fn assemble_ch_coefficients(
    op: &LaplacianOperator,
    phi: &Field,
    t: &Field,
    h: &Field,
    xi: &Field,
    constants: &PhysicalConstants,
    dt: f64,
) -> Result<ChCoefficients> {
    check_inputs(phi, t, h, xi, dt)?;
    let dt = constants.mobility * dt;
    let grid = *phi.grid();
    let mut implicit_t = Array2::zeros(grid.shape());
    let mut explicit_mu = Array2::zeros(grid.shape());
    Zip::from(&mut implicit_t)
        .and(&mut explicit_mu)
        .and(phi.values())
        .and(t.values())
        .and(h.values())
        .and(xi.values())
        .for_each(|it, em, &p, &tv, &hv, &x| {
            *it = (1.0 - x) * tv;
            *em = 2.0 * x * tv * p + 4.0 * p * p * p + hv;
        });
    let lap_t = op.apply_values(&implicit_t);
    let lap_mu = op.apply_values(&explicit_mu);
    let c0 = lap_t.mapv(|v| 1.0 - 2.0 * dt * v);
    let c2 = implicit_t.mapv(|v| -2.0 * dt * v);
    let mut b = phi.values().clone();
    b.scaled_add(dt, &lap_mu);
    Ok(ChCoefficients {
        c0: Field::from_values(grid, c0)?,
        c2: Field::from_values(grid, c2)?,
        c4: constants.gamma * dt,
        b: Field::from_values(grid, b)?,
    })
}

fn divide_checked(b_hat: &mut Array2<f64>, omega: &Array2<f64>) -> Result<()> {
    for ((i, j), &w) in omega.indexed_iter() {
        if !(w.abs() > OMEGA_GUARD) {
            return Err(Error::SingularCoefficient { row: i, col: j, value: w });
        }
    }
    Zip::from(b_hat).and(omega).for_each(|y, &w| *y /= w);
    Ok(())
}

fn check_bases(bases: &SpectralBases, f: &Field) -> Result<()> {
    if bases.grid().shape() != f.grid().shape() {
        return Err(Error::ShapeMismatch {
            expected: bases.grid().shape(),
            found: f.grid().shape(),
        });
    }
    Ok(())
}

/// `Omega_ij = 1 + eps_ij + eta s_ij`.
pub fn ac_omega(coeffs: &AcCoefficients, eigen_sum: &Array2<f64>) -> Array2<f64> {
    let mut omega = eigen_sum.mapv(|s| coeffs.eta * s);
    Zip::from(&mut omega)
        .and(coeffs.eps.values())
        .for_each(|w, &e| *w += 1.0 + e);
    omega
}

/// `Omega_ij = c0_ij + c2_ij s_ij + c4 s_ij^2`.
pub fn ch_omega(coeffs: &ChCoefficients, eigen_sum: &Array2<f64>) -> Array2<f64> {
    let mut omega = Array2::zeros(eigen_sum.dim());
    Zip::from(&mut omega)
        .and(eigen_sum)
        .and(coeffs.c0.values())
        .and(coeffs.c2.values())
        .for_each(|w, &s, &c0, &c2| *w = c0 + c2 * s + coeffs.c4 * s * s);
    omega
}

pub fn solve_ac_step(coeffs: &AcCoefficients, bases: &SpectralBases) -> Result<Field> {
    solve_ac_with(coeffs, bases, &bases.eigen_sum())
}

pub fn solve_ch_step(coeffs: &ChCoefficients, bases: &SpectralBases) -> Result<Field> {
    solve_ch_with(coeffs, bases, &bases.eigen_sum())
}

fn solve_ac_with(coeffs: &AcCoefficients, bases: &SpectralBases, eigen_sum: &Array2<f64>) -> Result<Field> {
    check_bases(bases, &coeffs.b)?;
    let mut y = bases.forward(coeffs.b.values());
    divide_checked(&mut y, &ac_omega(coeffs, eigen_sum))?;
    Field::from_values(*coeffs.b.grid(), bases.inverse(&y))
}

fn solve_ch_with(coeffs: &ChCoefficients, bases: &SpectralBases, eigen_sum: &Array2<f64>) -> Result<Field> {
    check_bases(bases, &coeffs.b)?;
    let mut y = bases.forward(coeffs.b.values());
    divide_checked(&mut y, &ch_omega(coeffs, eigen_sum))?;
    Field::from_values(*coeffs.b.grid(), bases.inverse(&y))
}

/// Implicit stepper with bases and Laplacian prebuilt for one grid.
#[derive(Debug, Clone)]
pub struct ImplicitSolver {
    op: LaplacianOperator,
    bases: SpectralBases,
    eigen_sum: Array2<f64>,
}

impl ImplicitSolver {
    pub fn new(grid: &crate::grid::Grid) -> Result<Self> {
        let bases = SpectralBases::new(grid)?;
        let eigen_sum = bases.eigen_sum();
        Ok(ImplicitSolver {
            op: LaplacianOperator::new(grid)?,
            bases,
            eigen_sum,
        })
    }

    pub fn operator(&self) -> &LaplacianOperator {
        &self.op
    }

    pub fn bases(&self) -> &SpectralBases {
        &self.bases
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        model: Model,
        phi: &Field,
        t: &Field,
        h: &Field,
        xi: &Field,
        constants: &PhysicalConstants,
        dt: f64,
    ) -> Result<Field> {
        match model {
            Model::AllenCahn => self.ac_step(phi, t, h, xi, constants, dt),
            Model::CahnHilliard => self.ch_step(phi, t, h, xi, constants, dt),
        }
    }

    pub fn ac_step(
        &self,
        phi: &Field,
        t: &Field,
        h: &Field,
        xi: &Field,
        constants: &PhysicalConstants,
        dt: f64,
    ) -> Result<Field> {
        let coeffs = assemble_ac_coefficients(phi, t, h, xi, constants, dt)?;
        if dt == 0.0 {
            return Ok(phi.clone());
        }
        solve_ac_with(&coeffs, &self.bases, &self.eigen_sum)
    }

    pub fn ch_step(
        &self,
        phi: &Field,
        t: &Field,
        h: &Field,
        xi: &Field,
        constants: &PhysicalConstants,
        dt: f64,
    ) -> Result<Field> {
        let coeffs = assemble_ch_coefficients(&self.op, phi, t, h, xi, constants, dt)?;
        if dt == 0.0 {
            return Ok(phi.clone());
        }
        solve_ch_with(&coeffs, &self.bases, &self.eigen_sum)
    }
}

/// Left-hand side of the AC system applied to `x` by the stencil.
pub fn ac_operator_apply(coeffs: &AcCoefficients, op: &LaplacianOperator, x: &Field) -> Array2<f64> {
    let mut out = op.apply_values(x.values()) * coeffs.eta;
    Zip::from(&mut out)
        .and(x.values())
        .and(coeffs.eps.values())
        .for_each(|o, &xv, &e| *o += (1.0 + e) * xv);
    out
}

/// Left-hand side of the CH system applied to `x` by the stencil.
pub fn ch_operator_apply(coeffs: &ChCoefficients, op: &LaplacianOperator, x: &Field) -> Array2<f64> {
    let lap = op.apply_values(x.values());
    let bih = op.apply_values(&lap);
    let mut out = bih * coeffs.c4;
    Zip::from(&mut out)
        .and(x.values())
        .and(&lap)
        .and(coeffs.c0.values())
        .and(coeffs.c2.values())
        .for_each(|o, &xv, &l, &c0, &c2| *o += c0 * xv + c2 * l);
    out
}

/// `max |lhs(x) - b| / max |b|`.
pub fn relative_residual(lhs: &Array2<f64>, b: &Field) -> f64 {
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    let err = lhs
        .iter()
        .zip(b.values())
        .fold(0.0_f64, |acc, (l, bv)| acc.max((l - bv).abs()));
    err / scale
}

/// Dense `(n m) x (n m)` 2-D Laplacian for row-major vectorisation.
pub fn dense_laplacian(grid: &crate::grid::Grid) -> Result<DMatrix<f64>> {
    let (n, m) = grid.shape();
    let a_n = LaplacianMatrix::build(n, grid.dr, grid.bc_y)?;
    let a_m = LaplacianMatrix::build(m, grid.dr, grid.bc_x)?;
    let (an, am) = (a_n.entries(), a_m.entries());
    let dof = n * m;
    let mut l = DMatrix::zeros(dof, dof);
    for i in 0..n {
        for j in 0..m {
            let row = i * m + j;
            for k in 0..n {
                l[(row, k * m + j)] += an[[i, k]];
            }
            for k in 0..m {
                l[(row, i * m + k)] += am[[j, k]];
            }
        }
    }
    Ok(l)
}

/// Assembles and solves the full linear system of one implicit step by LU
/// factorisation. Verification oracle for small grids.
#[allow(clippy::too_many_arguments)]
pub fn dense_reference_step(
    model: Model,
    phi: &Field,
    t: &Field,
    h: &Field,
    xi: &Field,
    constants: &PhysicalConstants,
    dt: f64,
) -> Result<Field> {
    let grid = *phi.grid();
    let dof = grid.dof();
    if dof > DENSE_LIMIT {
        return Err(Error::OracleTooLarge { dof, limit: DENSE_LIMIT });
    }
    let l = dense_laplacian(&grid)?;
    let (system, b) = match model {
        Model::AllenCahn => {
            let c = assemble_ac_coefficients(phi, t, h, xi, constants, dt)?;
            let diag = DVector::from_iterator(dof, c.eps.values().iter().map(|e| 1.0 + e));
            (DMatrix::from_diagonal(&diag) + &l * c.eta, c.b)
        }
        Model::CahnHilliard => {
            let op = LaplacianOperator::new(&grid)?;
            let c = assemble_ch_coefficients(&op, phi, t, h, xi, constants, dt)?;
            let c0 = DVector::from_iterator(dof, c.c0.values().iter().copied());
            let c2 = DVector::from_iterator(dof, c.c2.values().iter().copied());
            let system = DMatrix::from_diagonal(&c0) + DMatrix::from_diagonal(&c2) * &l + (&l * &l) * c.c4;
            (system, c.b)
        }
    };
    let rhs = DVector::from_iterator(dof, b.values().iter().copied());
    let x = system.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Field::from_values(grid, Array2::from_shape_vec(grid.shape(), x.iter().copied().collect()).expect("shape"))
}
