//! Piecewise-constant-in-time, region-masked external parameters `T(x, t)`
//! and `h(x, t)`.
//!
//! Rows cover `[0, t_end_0]` then `(t_begin_k, t_end_k]`: the first interval
//! is closed at zero and every interval is closed on the right.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Times closer than this (relative) to a row boundary snap onto it, so that
/// `k * dt` lands in the interval its exact value belongs to.
const TIME_SNAP: f64 = 1e-9;

/// Region id of the `(T_-, h_-)` parameters in the two-region presets.
pub const REGION_MINUS: u32 = 0;
/// Region id of the `(T_+, h_+)` parameters in the two-region presets.
pub const REGION_PLUS: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum RegionMask {
    /// Every cell is region 0.
    Uniform,
    /// Alternating horizontal bands: row `i` belongs to region
    /// `((i + phase_offset) / band_height) % 2`.
    HorizontalBands { band_height: usize, phase_offset: usize },
    /// Explicit per-cell region ids, same layout as a field.
    CellMap(Array2<u32>),
}

impl RegionMask {
    pub fn region_ids(&self) -> BTreeSet<u32> {
        match self {
            RegionMask::Uniform => [0].into_iter().collect(),
            RegionMask::HorizontalBands { .. } => [REGION_MINUS, REGION_PLUS].into_iter().collect(),
            RegionMask::CellMap(ids) => ids.iter().copied().collect(),
        }
    }

    #[inline]
    pub fn region_at(&self, i: usize, j: usize) -> u32 {
        match self {
            RegionMask::Uniform => 0,
            RegionMask::HorizontalBands {
                band_height,
                phase_offset,
            } => (((i + phase_offset) / band_height) % 2) as u32,
            RegionMask::CellMap(ids) => ids[[i, j]],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RegionMask::HorizontalBands { band_height: 0, .. } => {
                Err(Error::InvalidSchedule("band height must be at least one cell".into()))
            }
            RegionMask::CellMap(ids) if ids.is_empty() => Err(Error::InvalidSchedule("empty cell map".into())),
            _ => Ok(()),
        }
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if let RegionMask::CellMap(ids) = self {
            if ids.dim() != grid.shape() {
                return Err(Error::ShapeMismatch {
                    expected: grid.shape(),
                    found: ids.dim(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionParams {
    pub t: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRow {
    pub t_begin: f64,
    pub t_end: f64,
    pub values: BTreeMap<u32, RegionParams>,
}

impl ScheduleRow {
    pub fn new(t_begin: f64, t_end: f64, values: impl IntoIterator<Item = (u32, RegionParams)>) -> Self {
        ScheduleRow {
            t_begin,
            t_end,
            values: values.into_iter().collect(),
        }
    }

    /// A row in the two-region table layout `T_+, T_-, h_+, h_-`.
    pub fn two_region(t_begin: f64, t_end: f64, t_plus: f64, t_minus: f64, h_plus: f64, h_minus: f64) -> Self {
        Self::new(
            t_begin,
            t_end,
            [
                (REGION_PLUS, RegionParams { t: t_plus, h: h_plus }),
                (REGION_MINUS, RegionParams { t: t_minus, h: h_minus }),
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSchedule {
    mask: RegionMask,
    rows: Vec<ScheduleRow>,
}

impl ParameterSchedule {
    pub fn new(mask: RegionMask, rows: Vec<ScheduleRow>) -> Result<Self> {
        mask.validate()?;
        if rows.is_empty() {
            return Err(Error::InvalidSchedule("at least one row is required".into()));
        }
        if rows[0].t_begin != 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "first row must begin at 0, begins at {}",
                rows[0].t_begin
            )));
        }
        let ids = mask.region_ids();
        for (k, row) in rows.iter().enumerate() {
            if !(row.t_end > row.t_begin) || !row.t_end.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "row {k}: empty interval ({}, {}]",
                    row.t_begin, row.t_end
                )));
            }
            if k > 0 && row.t_begin != rows[k - 1].t_end {
                return Err(Error::InvalidSchedule(format!(
                    "row {k} begins at {} but row {} ends at {}",
                    row.t_begin,
                    k - 1,
                    rows[k - 1].t_end
                )));
            }
            for id in row.values.keys() {
                if !ids.contains(id) {
                    return Err(Error::InvalidSchedule(format!("row {k} references unknown region {id}")));
                }
            }
            for id in &ids {
                if !row.values.contains_key(id) {
                    return Err(Error::InvalidSchedule(format!("row {k} has no values for region {id}")));
                }
            }
            if row.values.values().any(|p| !p.t.is_finite() || !p.h.is_finite()) {
                return Err(Error::InvalidSchedule(format!("row {k} has non-finite parameters")));
            }
        }
        Ok(ParameterSchedule { mask, rows })
    }

    pub fn mask(&self) -> &RegionMask {
        &self.mask
    }

    pub fn rows(&self) -> &[ScheduleRow] {
        &self.rows
    }

    pub fn t_end(&self) -> f64 {
        self.rows.last().expect("non-empty").t_end
    }

    /// Extends the last row so the schedule covers `[0, t_final]`.
    pub fn hold_last_until(&mut self, t_final: f64) {
        let last = self.rows.last_mut().expect("non-empty");
        if t_final > last.t_end {
            last.t_end = t_final;
        }
    }

    pub fn row_at(&self, t: f64) -> Result<&ScheduleRow> {
        let end = self.t_end();
        let tol = TIME_SNAP * end.abs().max(1.0);
        if !(t >= -tol && t <= end + tol) {
            return Err(Error::OutOfRange { t, end });
        }
        let row = self
            .rows
            .iter()
            .find(|r| t <= r.t_end + TIME_SNAP * r.t_end.abs().max(1.0))
            .unwrap_or_else(|| self.rows.last().expect("non-empty"));
        Ok(row)
    }

    /// Per-cell `(T, h)` fields at time `t`.
    pub fn evaluate(&self, t: f64, grid: &Grid) -> Result<(Field, Field)> {
        self.mask.check_grid(grid)?;
        let row = self.row_at(t)?;
        let lookup = |i, j| row.values[&self.mask.region_at(i, j)];
        let tf = Field::from_fn(*grid, |i, j| lookup(i, j).t);
        let hf = Field::from_fn(*grid, |i, j| lookup(i, j).h);
        Ok((tf, hf))
    }

    /// Range of `T` over every row and region.
    pub fn temperature_range(&self) -> (f64, f64) {
        self.rows
            .iter()
            .flat_map(|r| r.values.values().map(|p| p.t))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
    }
}

pub fn evaluate_schedule(s: &ParameterSchedule, t: f64, grid: &Grid) -> Result<(Field, Field)> {
    s.evaluate(t, grid)
}

pub fn uniform_schedule(t: f64, h: f64, t_final: f64) -> Result<ParameterSchedule> {
    if !(t_final > 0.0) {
        return Err(Error::validation("t_final", format!("must be positive, got {t_final}")));
    }
    ParameterSchedule::new(
        RegionMask::Uniform,
        vec![ScheduleRow::new(0.0, t_final, [(0, RegionParams { t, h })])],
    )
}

/// Four-period two-region schedule used by the varying-parameter Allen-Cahn
/// benchmark.
pub fn banded_ac_rows() -> Vec<ScheduleRow> {
    vec![
        ScheduleRow::two_region(0.00, 0.05, 0.49, -4.13, -11.76, 3.24),
        ScheduleRow::two_region(0.05, 0.10, 4.18, 0.81, -5.15, 2.41),
        ScheduleRow::two_region(0.10, 0.15, 1.91, -2.51, -9.85, 4.88),
        ScheduleRow::two_region(0.15, 0.20, 2.75, 2.23, -15.23, 8.05),
    ]
}

/// Four-period two-region schedule used by the varying-parameter
/// Cahn-Hilliard benchmark.
pub fn banded_ch_rows() -> Vec<ScheduleRow> {
    vec![
        ScheduleRow::two_region(0.00, 0.05, 9.44, 4.72, -22.84, 13.41),
        ScheduleRow::two_region(0.05, 0.10, -7.52, 2.51, -19.08, -1.03),
        ScheduleRow::two_region(0.10, 0.15, 9.73, 12.65, -23.46, 29.30),
        ScheduleRow::two_region(0.15, 0.20, 25.31, 25.37, -54.69, 54.57),
    ]
}
