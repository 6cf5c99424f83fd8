//! One-dimensional Laplacian matrices, their orthogonal eigenbases, and the
//! 2-D operators `A_n F + F A_m` built from them.
//!
//! The axis matrices are tridiagonal with boundary corner terms, so the
//! Laplacian is applied through a three-coefficient stencil per row read
//! straight out of the matrix entries. Eigenbases use the closed forms of
//! the cosine (Neumann, cell centred) and real Fourier (periodic) modes,
//! ordered by increasing eigenvalue magnitude.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, Field, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    size: usize,
    dr: f64,
    bc: BoundaryCondition,
    entries: Array2<f64>,
}

impl LaplacianMatrix {
    pub fn build(size: usize, dr: f64, bc: BoundaryCondition) -> Result<Self> {
        if size < 3 {
            return Err(Error::InvalidSize { size });
        }
        if !(dr > 0.0 && dr.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {dr}")));
        }
        let scale = 1.0 / (dr * dr);
        let mut a = Array2::zeros((size, size));
        for i in 0..size {
            a[[i, i]] = -2.0 * scale;
            if i > 0 {
                a[[i, i - 1]] = scale;
            }
            if i + 1 < size {
                a[[i, i + 1]] = scale;
            }
        }
        let last = size - 1;
        match bc {
            BoundaryCondition::Periodic => {
                a[[0, last]] = scale;
                a[[last, 0]] = scale;
            }
            BoundaryCondition::Neumann => {
                a[[0, 0]] = -scale;
                a[[last, last]] = -scale;
            }
            BoundaryCondition::Symmetric => {
                a[[0, 1]] = 2.0 * scale;
                a[[last, last - 1]] = 2.0 * scale;
            }
        }
        Ok(LaplacianMatrix {
            size,
            dr,
            bc,
            entries: a,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Row coefficients as `(previous, diagonal, next)` with cyclic neighbours.
    pub fn stencil(&self) -> AxisStencil {
        AxisStencil::from_matrix(&self.entries)
    }

}

/// Three-point stencil `(A u)_i = lo_i u_{i-1} + diag_i u_i + hi_i u_{i+1}`,
/// neighbour indices taken cyclically. Non-periodic matrices have zero corner
/// entries, so the wrapped terms vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisStencil {
    pub lo: Vec<f64>,
    pub diag: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisStencil {
    fn from_matrix(a: &Array2<f64>) -> Self {
        let n = a.nrows();
        let mut lo = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            lo[i] = a[[i, (i + n - 1) % n]];
            diag[i] = a[[i, i]];
            hi[i] = a[[i, (i + 1) % n]];
        }
        AxisStencil { lo, diag, hi }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Orthogonal eigendecomposition `A = Q diag(d) Q^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    /// Columns are eigenvectors.
    pub q: Array2<f64>,
    /// Eigenvalues in units of 1/length^2, all non-positive.
    pub d: Array1<f64>,
}

impl SpectralBasis {
    pub fn size(&self) -> usize {
        self.d.len()
    }
}

/// Eigenbasis of a Periodic or Neumann Laplacian matrix.
pub fn eigendecompose(a: &LaplacianMatrix) -> Result<SpectralBasis> {
    let n = a.size;
    let scale = 1.0 / (a.dr * a.dr);
    let nf = n as f64;
    match a.bc {
        BoundaryCondition::Neumann => {
            let mut q = Array2::zeros((n, n));
            let mut d = Array1::zeros(n);
            for k in 0..n {
                let norm = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                for i in 0..n {
                    q[[i, k]] = norm * (PI * k as f64 * (i as f64 + 0.5) / nf).cos();
                }
                d[k] = 2.0 * ((PI * k as f64 / nf).cos() - 1.0) * scale;
            }
            Ok(SpectralBasis { q, d })
        }
        BoundaryCondition::Periodic => {
            let mut q = Array2::zeros((n, n));
            let mut d = Array1::zeros(n);
            let eig = |p: usize| 2.0 * ((2.0 * PI * p as f64 / nf).cos() - 1.0) * scale;
            let c0 = (1.0 / nf).sqrt();
            let c = (2.0 / nf).sqrt();
            for i in 0..n {
                q[[i, 0]] = c0;
            }
            let mut col = 1;
            let mut p = 1;
            while col < n {
                let theta = 2.0 * PI * p as f64 / nf;
                if 2 * p == n {
                    for i in 0..n {
                        q[[i, col]] = if i % 2 == 0 { c0 } else { -c0 };
                    }
                    d[col] = eig(p);
                    col += 1;
                } else {
                    for i in 0..n {
                        q[[i, col]] = c * (theta * i as f64).cos();
                        q[[i, col + 1]] = c * (theta * i as f64).sin();
                    }
                    d[col] = eig(p);
                    d[col + 1] = eig(p);
                    col += 2;
                }
                p += 1;
            }
            Ok(SpectralBasis { q, d })
        }
        BoundaryCondition::Symmetric => Err(Error::UnsupportedBoundary { bc: a.bc }),
    }
}

/// The 2-D five-point Laplacian `A_n F + F A_m` of a grid.
///
/// Each axis matrix acts along its own axis as a stencil, i.e. the column
/// term is `F A_m^T`. The two forms agree for symmetric `A_m`; for the
/// mirror boundary the stencil form is the one matching the ghost-node
/// reflection.
#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    grid: Grid,
    rows: AxisStencil,
    cols: AxisStencil,
}

impl LaplacianOperator {
    pub fn new(grid: &Grid) -> Result<Self> {
        grid.validate()?;
        let a_n = LaplacianMatrix::build(grid.n, grid.dr, grid.bc_y)?;
        let a_m = LaplacianMatrix::build(grid.m, grid.dr, grid.bc_x)?;
        Ok(LaplacianOperator {
            grid: *grid,
            rows: a_n.stencil(),
            cols: a_m.stencil(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply(&self, f: &Field) -> Field {
        let values = self.apply_values(f.values());
        Field::from_values(self.grid, values).expect("operator preserves shape")
    }

    pub fn apply_biharmonic(&self, f: &Field) -> Field {
        self.apply(&self.apply(f))
    }

    /// Applies the operator to a raw `n x m` array.
    pub fn apply_values(&self, u: &Array2<f64>) -> Array2<f64> {
        let (n, m) = self.grid.shape();
        assert_eq!(u.dim(), (n, m), "field shape does not match operator grid");
        let owned;
        let src = match u.as_slice() {
            Some(s) => s,
            None => {
                owned = u.as_standard_layout().to_owned();
                owned.as_slice().expect("standard layout")
            }
        };
        let mut out = vec![0.0; n * m];
        let (rl, rd, rh) = (&self.rows.lo, &self.rows.diag, &self.rows.hi);
        let (cl, cd, ch) = (&self.cols.lo, &self.cols.diag, &self.cols.hi);
        for i in 0..n {
            let up = &src[((i + n - 1) % n) * m..][..m];
            let row = &src[i * m..][..m];
            let down = &src[((i + 1) % n) * m..][..m];
            let dst = &mut out[i * m..][..m];
            let (a, b, c) = (rl[i], rd[i], rh[i]);
            let horizontal = |j: usize, jp: usize, jn: usize| {
                cl[j] * row[jp] + cd[j] * row[j] + ch[j] * row[jn]
            };
            dst[0] = a * up[0] + b * row[0] + c * down[0] + horizontal(0, m - 1, 1);
            for j in 1..m - 1 {
                dst[j] = a * up[j]
                    + b * row[j]
                    + c * down[j]
                    + (cl[j] * row[j - 1] + cd[j] * row[j] + ch[j] * row[j + 1]);
            }
            let j = m - 1;
            dst[j] = a * up[j] + b * row[j] + c * down[j] + horizontal(j, j - 1, 0);
        }
        Array2::from_shape_vec((n, m), out).expect("shape")
    }
}

pub fn apply_laplacian(f: &Field) -> Result<Field> {
    Ok(LaplacianOperator::new(f.grid())?.apply(f))
}

pub fn apply_biharmonic(f: &Field) -> Result<Field> {
    Ok(LaplacianOperator::new(f.grid())?.apply_biharmonic(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Eigenbases of both axis matrices of a grid. Built once per run.
#[derive(Debug, Clone)]
pub struct SpectralBases {
    grid: Grid,
    rows: SpectralBasis,
    cols: SpectralBasis,
}

impl SpectralBases {
    pub fn new(grid: &Grid) -> Result<Self> {
        grid.validate()?;
        for bc in [grid.bc_y, grid.bc_x] {
            if !bc.supports_direct_solve() {
                return Err(Error::UnsupportedBoundary { bc });
            }
        }
        let rows = eigendecompose(&LaplacianMatrix::build(grid.n, grid.dr, grid.bc_y)?)?;
        let cols = eigendecompose(&LaplacianMatrix::build(grid.m, grid.dr, grid.bc_x)?)?;
        Ok(SpectralBases {
            grid: *grid,
            rows,
            cols,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> &SpectralBasis {
        &self.rows
    }

    pub fn cols(&self) -> &SpectralBasis {
        &self.cols
    }

    /// `d_{n_i} + d_{m_j}`: the 2-D Laplacian eigenvalue of spectral mode (i, j).
    pub fn eigen_sum(&self) -> Array2<f64> {
        let (dn, dm) = (&self.rows.d, &self.cols.d);
        Array2::from_shape_fn(self.grid.shape(), |(i, j)| dn[i] + dm[j])
    }

    /// `Q_n^T F Q_m`.
    pub fn forward(&self, f: &Array2<f64>) -> Array2<f64> {
        self.rows.q.t().dot(f).dot(&self.cols.q)
    }

    /// `Q_n Y Q_m^T`.
    pub fn inverse(&self, y: &Array2<f64>) -> Array2<f64> {
        self.rows.q.dot(y).dot(&self.cols.q.t())
    }

    pub fn transform(&self, f: &Field, direction: Direction) -> Result<Field> {
        if f.grid().shape() != self.grid.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.grid.shape(),
                found: f.grid().shape(),
            });
        }
        let values = match direction {
            Direction::Forward => self.forward(f.values()),
            Direction::Inverse => self.inverse(f.values()),
        };
        Field::from_values(*f.grid(), values)
    }
}

pub fn spectral_transform(f: &Field, direction: Direction) -> Result<Field> {
    SpectralBases::new(f.grid())?.transform(f, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    use crate::grid::BoundaryCondition::{Neumann, Periodic, Symmetric};

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn neumann_matrix_matches_expected() {
        let a = LaplacianMatrix::build(3, 1.0, Neumann).unwrap();
        assert_eq!(
            a.entries(),
            &array![[-1.0, 1.0, 0.0], [1.0, -2.0, 1.0], [0.0, 1.0, -1.0]]
        );
        let half = LaplacianMatrix::build(3, 0.5, Neumann).unwrap();
        assert_eq!(half.entries(), &(a.entries() * 4.0));
    }

    #[test]
    fn periodic_matrix_first_row() {
        let a = LaplacianMatrix::build(4, 1.0, Periodic).unwrap();
        assert_eq!(a.entries().row(0).to_vec(), vec![-2.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn symmetric_matrix_is_not_symmetric() {
        let a = LaplacianMatrix::build(5, 1.0, Symmetric).unwrap();
        assert_eq!(a.entries().row(0).to_vec(), vec![-2.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(a.entries().row(4).to_vec(), vec![0.0, 0.0, 0.0, 2.0, -2.0]);
        assert_ne!(a.entries(), &a.entries().t().to_owned());
    }

    #[test]
    fn rows_sum_to_zero() {
        for bc in [Periodic, Neumann, Symmetric] {
            for size in [3, 4, 7, 16] {
                let a = LaplacianMatrix::build(size, 0.3, bc).unwrap();
                for row in a.entries().rows() {
                    assert_eq!(row.sum(), 0.0, "{bc:?} size {size}");
                }
            }
        }
    }

    #[test]
    fn rejects_small_size() {
        assert!(matches!(
            LaplacianMatrix::build(2, 1.0, Periodic),
            Err(Error::InvalidSize { size: 2 })
        ));
    }

    #[test]
    fn neumann_eigenvalues_n3() {
        let b = eigendecompose(&LaplacianMatrix::build(3, 1.0, Neumann).unwrap()).unwrap();
        let expected = [0.0, -1.0, -3.0];
        for (d, e) in b.d.iter().zip(expected) {
            assert!((d - e).abs() < 1e-14, "{d} vs {e}");
        }
    }

    #[test]
    fn periodic_eigenvalues_n4() {
        let b = eigendecompose(&LaplacianMatrix::build(4, 1.0, Periodic).unwrap()).unwrap();
        let expected = [0.0, -2.0, -2.0, -4.0];
        for (d, e) in b.d.iter().zip(expected) {
            assert!((d - e).abs() < 1e-14, "{d} vs {e}");
        }
    }

    #[test]
    fn symmetric_bc_has_no_basis() {
        let a = LaplacianMatrix::build(5, 1.0, Symmetric).unwrap();
        assert!(matches!(eigendecompose(&a), Err(Error::UnsupportedBoundary { .. })));
    }

    #[test]
    fn basis_invariants_and_dense_eigensolver_agree() {
        for bc in [Periodic, Neumann] {
            for size in [3, 4, 5, 8, 9, 16, 33] {
                let a = LaplacianMatrix::build(size, 0.7, bc).unwrap();
                let b = eigendecompose(&a).unwrap();
                let eye = Array2::<f64>::eye(size);
                assert!(max_abs(&(b.q.t().dot(&b.q) - &eye)) <= 1e-12);
                let recon = b.q.dot(&Array2::from_diag(&b.d)).dot(&b.q.t());
                let amax = max_abs(a.entries());
                assert!(max_abs(&(recon - a.entries())) <= 1e-10 * amax);
                assert!(b.d.iter().all(|&d| d <= 0.0));
                for w in b.d.as_slice().unwrap().windows(2) {
                    assert!(w[0] >= w[1] - 1e-9 * amax, "eigenvalues not ordered by magnitude");
                }

                // Independent route: general symmetric eigensolver.
                let dense = nalgebra::DMatrix::from_fn(size, size, |i, j| a.entries()[[i, j]]);
                let mut reference: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
                reference.sort_by(|x, y| y.partial_cmp(x).unwrap());
                for (d, r) in b.d.iter().zip(&reference) {
                    assert!((d - r).abs() <= 1e-10 * amax, "{bc:?} {size}: {d} vs {r}");
                }
            }
        }
    }

    /// Characteristic polynomial det(A - lambda I) by cofactor-free Gaussian
    /// elimination, evaluated at the closed-form eigenvalues.
    #[test]
    fn characteristic_polynomial_vanishes_neumann_3() {
        let a = LaplacianMatrix::build(3, 1.0, Neumann).unwrap();
        for lambda in [0.0, -1.0, -3.0] {
            let m = a.entries() - &(Array2::<f64>::eye(3) * lambda);
            let det = m[[0, 0]] * (m[[1, 1]] * m[[2, 2]] - m[[1, 2]] * m[[2, 1]])
                - m[[0, 1]] * (m[[1, 0]] * m[[2, 2]] - m[[1, 2]] * m[[2, 0]])
                + m[[0, 2]] * (m[[1, 0]] * m[[2, 1]] - m[[1, 1]] * m[[2, 0]]);
            assert!(det.abs() < 1e-12, "lambda {lambda}: det {det}");
        }
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for bc in [Periodic, Neumann, Symmetric] {
            let g = Grid::new(5, 6, 0.1, bc, Periodic).unwrap();
            let lap = apply_laplacian(&Field::new(g, 3.7)).unwrap();
            assert!(lap.values().iter().all(|&v| v == 0.0));
            assert!(apply_biharmonic(&Field::new(g, -1.2)).unwrap().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unit_spike_stencil() {
        let g = Grid::square(5, 1.0, Neumann).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[[2, 2]] = 1.0;
        let lap = apply_laplacian(&f).unwrap();
        let mut expected = Array2::<f64>::zeros((5, 5));
        expected[[2, 2]] = -4.0;
        for (i, j) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            expected[[i, j]] = 1.0;
        }
        assert_eq!(lap.values(), &expected);
    }

    #[test]
    fn periodic_cosine_is_eigenmode() {
        let (n, m, dr) = (6, 8, 0.25);
        let g = Grid::square(n, dr, Periodic).unwrap();
        let g = Grid { m, ..g };
        let f = Field::from_fn(g, |_, j| (2.0 * PI * j as f64 / m as f64).cos());
        let lambda = (2.0 * (2.0 * PI / m as f64).cos() - 2.0) / (dr * dr);
        let lap = apply_laplacian(&f).unwrap();
        let bih = apply_biharmonic(&f).unwrap();
        for ((l, b), v) in lap.values().iter().zip(bih.values()).zip(f.values()) {
            assert!((l - lambda * v).abs() < 1e-12);
            assert!((b - lambda * lambda * v).abs() < 1e-10);
        }
    }

    #[test]
    fn transform_roundtrip_and_indicator() {
        let g = Grid::new(6, 5, 0.2, Periodic, Neumann).unwrap();
        let bases = SpectralBases::new(&g).unwrap();
        let f = Field::from_fn(g, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.3);
        let fwd = bases.transform(&f, Direction::Forward).unwrap();
        let back = bases.transform(&fwd, Direction::Inverse).unwrap();
        assert!(back.max_abs_difference(&f).unwrap() < 1e-12);

        let zero = bases.transform(&Field::zeros(g), Direction::Forward).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let (a, b) = (3, 2);
        let outer = Field::from_fn(g, |i, j| bases.rows().q[[i, a]] * bases.cols().q[[j, b]]);
        let y = bases.transform(&outer, Direction::Forward).unwrap();
        for ((i, j), v) in y.values().indexed_iter() {
            let e = if (i, j) == (a, b) { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_grid_rejects_transform() {
        let g = Grid::new(5, 5, 1.0, Periodic, Symmetric).unwrap();
        assert!(matches!(
            spectral_transform(&Field::zeros(g), Direction::Forward),
            Err(Error::UnsupportedBoundary { bc: Symmetric })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn bc() -> impl Strategy<Value = BoundaryCondition> {
            prop_oneof![Just(Periodic), Just(Neumann), Just(Symmetric)]
        }

        /// Ghost-cell stencil, independent of the matrix form.
        fn stencil_oracle(u: &Array2<f64>, grid: &Grid) -> Array2<f64> {
            let (n, m) = grid.shape();
            let ghost = |bc: BoundaryCondition, k: isize, len: usize| -> usize {
                let last = len as isize - 1;
                let idx = if k < 0 {
                    match bc {
                        Periodic => k + len as isize,
                        Neumann => 0,
                        Symmetric => 1,
                    }
                } else if k > last {
                    match bc {
                        Periodic => k - len as isize,
                        Neumann => last,
                        Symmetric => last - 1,
                    }
                } else {
                    k
                };
                idx as usize
            };
            let h2 = grid.dr * grid.dr;
            Array2::from_shape_fn((n, m), |(i, j)| {
                let (ii, jj) = (i as isize, j as isize);
                let up = u[[ghost(grid.bc_y, ii - 1, n), j]];
                let down = u[[ghost(grid.bc_y, ii + 1, n), j]];
                let left = u[[i, ghost(grid.bc_x, jj - 1, m)]];
                let right = u[[i, ghost(grid.bc_x, jj + 1, m)]];
                (up + down + left + right - 4.0 * u[[i, j]]) / h2
            })
        }

        proptest! {
            #[test]
            fn laplacian_matches_ghost_stencil(
                n in 3usize..9, m in 3usize..9, by in bc(), bx in bc(),
                dr in 0.05..2.0f64, seed in prop::collection::vec(-3.0..3.0f64, 81)
            ) {
                let g = Grid::new(n, m, dr, by, bx).unwrap();
                let u = Array2::from_shape_fn((n, m), |(i, j)| seed[i * 9 + j]);
                let lap = LaplacianOperator::new(&g).unwrap().apply_values(&u);
                let oracle = stencil_oracle(&u, &g);
                let scale = max_abs(&oracle).max(1.0 / (dr * dr));
                prop_assert!(max_abs(&(lap - oracle)) <= 1e-12 * scale);
            }

            #[test]
            fn matrix_is_negative_semidefinite(
                size in 3usize..20, periodic in any::<bool>(),
                x in prop::collection::vec(-5.0..5.0f64, 20)
            ) {
                let bc = if periodic { Periodic } else { Neumann };
                let a = LaplacianMatrix::build(size, 0.5, bc).unwrap();
                let v = Array1::from_vec(x[..size].to_vec());
                let quad = v.dot(&a.entries().dot(&v));
                prop_assert!(quad <= 1e-10 * v.dot(&v).max(1.0));
            }

            #[test]
            fn biharmonic_is_laplacian_twice(
                n in 3usize..8, m in 3usize..8, by in bc(), bx in bc(),
                seed in prop::collection::vec(-1.0..1.0f64, 64)
            ) {
                let g = Grid::new(n, m, 0.3, by, bx).unwrap();
                let f = Field::from_fn(g, |i, j| seed[i * 8 + j]);
                let op = LaplacianOperator::new(&g).unwrap();
                let twice = op.apply(&op.apply(&f));
                let bih = op.apply_biharmonic(&f);
                prop_assert!(twice.max_abs_difference(&bih).unwrap() <= 1e-12 * twice.max_abs().max(1.0));
            }
        }
    }
}
