//! Run configuration (TOML), CSV series and snapshots, and the run manifest.
//!
//! Numbers are written with 17 significant digits so every value re-parses
//! to the identical double.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::energy::PhysicalConstants;
use crate::error::{Error, Result};
use crate::experiments::{
    InitialCondition, PerturbationSpec, RecordingSpec, RunResult, Scenario, SeriesRecord, Snapshot, Solver, Verdict,
};
use crate::grid::{BoundaryCondition, Field, Grid};
use crate::schedule::{ParameterSchedule, RegionMask, RegionParams, ScheduleRow, REGION_MINUS, REGION_PLUS};
use crate::splitting::SplittingPolicy;
use crate::Model;

pub const SERIES_FILE: &str = "series.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SERIES_HEADER: &str = "step,time,free_energy,mass,l2_perturbation,max_abs_phi";

fn default_bc() -> BoundaryCondition {
    BoundaryCondition::Periodic
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    /// Defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub dr: f64,
    #[serde(default = "default_bc")]
    pub bc_x: BoundaryCondition,
    #[serde(default = "default_bc")]
    pub bc_y: BoundaryCondition,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        if self.n < 3 {
            return Err(Error::validation("grid.n", format!("must be at least 3, got {}", self.n)));
        }
        let m = self.m.unwrap_or(self.n);
        if m < 3 {
            return Err(Error::validation("grid.m", format!("must be at least 3, got {m}")));
        }
        if !(self.dr > 0.0 && self.dr.is_finite()) {
            return Err(Error::validation("grid.dr", format!("must be positive, got {}", self.dr)));
        }
        Grid::new(self.n, m, self.dr, self.bc_y, self.bc_x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    #[default]
    Uniform,
    HorizontalBands {
        band_height: usize,
        #[serde(default)]
        phase_offset: usize,
    },
    /// CSV of non-negative integer region ids, one line per grid row.
    CellMap { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: u32,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default)]
    pub h: f64,
}

/// One time interval, in one of three shapes: `T`/`h` for a single region,
/// `T_plus`/`T_minus`/`h_plus`/`h_minus` for the two-region masks, or an
/// explicit `regions` list.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub t_begin: f64,
    pub t_end: f64,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(rename = "T_plus", default, skip_serializing_if = "Option::is_none")]
    pub t_plus: Option<f64>,
    #[serde(rename = "T_minus", default, skip_serializing_if = "Option::is_none")]
    pub t_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<RegionSpec>>,
}

impl RowSpec {
    fn to_row(&self, index: usize) -> Result<ScheduleRow> {
        let key = format!("schedule.rows[{index}]");
        let two_region = self.t_plus.is_some() || self.t_minus.is_some();
        let shapes = [self.t.is_some(), two_region, self.regions.is_some()];
        if shapes.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::validation(
                key,
                "give exactly one of `T`, `T_plus`/`T_minus`, or `regions`",
            ));
        }
        if let Some(regions) = &self.regions {
            return Ok(ScheduleRow::new(
                self.t_begin,
                self.t_end,
                regions.iter().map(|r| (r.id, RegionParams { t: r.t, h: r.h })),
            ));
        }
        if two_region {
            let (Some(tp), Some(tm)) = (self.t_plus, self.t_minus) else {
                return Err(Error::validation(key, "both `T_plus` and `T_minus` are required"));
            };
            if self.h.is_some() {
                return Err(Error::validation(key, "use `h_plus`/`h_minus` with `T_plus`/`T_minus`"));
            }
            return Ok(ScheduleRow::two_region(
                self.t_begin,
                self.t_end,
                tp,
                tm,
                self.h_plus.unwrap_or(0.0),
                self.h_minus.unwrap_or(0.0),
            ));
        }
        if self.h_plus.is_some() || self.h_minus.is_some() {
            return Err(Error::validation(key, "use `h` with `T`"));
        }
        Ok(ScheduleRow::new(
            self.t_begin,
            self.t_end,
            [(0, RegionParams {
                t: self.t.expect("checked"),
                h: self.h.unwrap_or(0.0),
            })],
        ))
    }

    fn from_row(row: &ScheduleRow) -> RowSpec {
        let ids: Vec<u32> = row.values.keys().copied().collect();
        let mut spec = RowSpec {
            t_begin: row.t_begin,
            t_end: row.t_end,
            ..Default::default()
        };
        if ids == [0] {
            spec.t = Some(row.values[&0].t);
            spec.h = Some(row.values[&0].h);
        } else if ids == [REGION_MINUS, REGION_PLUS] {
            spec.t_plus = Some(row.values[&REGION_PLUS].t);
            spec.t_minus = Some(row.values[&REGION_MINUS].t);
            spec.h_plus = Some(row.values[&REGION_PLUS].h);
            spec.h_minus = Some(row.values[&REGION_MINUS].h);
        } else {
            spec.regions = Some(
                row.values
                    .iter()
                    .map(|(&id, p)| RegionSpec { id, t: p.t, h: p.h })
                    .collect(),
            );
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub mask: MaskSpec,
    pub rows: Vec<RowSpec>,
}

/// Outcome fields appended to a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    pub gradient_stable: bool,
    pub mass_drift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub solver: Solver,
    pub dt: f64,
    pub t_final: f64,
    /// Seed of the stability perturbation.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub grid: GridSpec,
    pub constants: PhysicalConstants,
    pub schedule: ScheduleSpec,
    pub initial: InitialCondition,
    #[serde(default)]
    pub splitting: SplittingPolicy,
    #[serde(default)]
    pub recording: RecordingSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<RunSummary>,
}

impl RunConfig {
    /// Checks every field and the consistency between them.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::validation("dt", format!("must be positive and finite, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation("t_final", format!("must be positive, got {}", self.t_final)));
        }
        let grid = self.grid.grid()?;
        if self.solver == Solver::Implicit && !grid.supports_direct_solve() {
            return Err(Error::validation(
                "solver",
                "the implicit solver supports periodic and Neumann boundaries only",
            ));
        }
        self.constants.validate().map_err(|e| rekey(e, "constants"))?;
        self.splitting.validate()?;
        self.recording.validate()?;
        self.perturbation.validate()?;
        if let InitialCondition::FromFile { path } = &self.initial {
            if !path.is_file() {
                return Err(Error::validation("initial.path", format!("{} does not exist", path.display())));
            }
        }
        if let MaskSpec::CellMap { path } = &self.schedule.mask {
            if !path.is_file() {
                return Err(Error::validation("schedule.mask.path", format!("{} does not exist", path.display())));
            }
        }
        self.to_scenario().map(|_| ())
    }

    pub fn parameter_schedule(&self, grid: &Grid) -> Result<ParameterSchedule> {
        let mask = match &self.schedule.mask {
            MaskSpec::Uniform => RegionMask::Uniform,
            MaskSpec::HorizontalBands {
                band_height,
                phase_offset,
            } => RegionMask::HorizontalBands {
                band_height: *band_height,
                phase_offset: *phase_offset,
            },
            MaskSpec::CellMap { path } => {
                let ids = read_cell_map_csv(path)?;
                if ids.dim() != grid.shape() {
                    return Err(Error::validation(
                        "schedule.mask.path",
                        format!("cell map is {:?}, grid is {:?}", ids.dim(), grid.shape()),
                    ));
                }
                RegionMask::CellMap(ids)
            }
        };
        let rows = self
            .schedule
            .rows
            .iter()
            .enumerate()
            .map(|(k, r)| r.to_row(k))
            .collect::<Result<Vec<_>>>()?;
        let schedule = ParameterSchedule::new(mask, rows).map_err(|e| rekey(e, "schedule.rows"))?;
        let end = schedule.t_end();
        if end < self.t_final * (1.0 - 1e-12) {
            return Err(Error::validation(
                "schedule.rows",
                format!("schedule covers [0, {end}] but t_final = {}", self.t_final),
            ));
        }
        Ok(schedule)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let grid = self.grid.grid()?;
        let scenario = Scenario {
            name: format!("{}_{}", self.model, self.solver),
            grid,
            model: self.model,
            constants: self.constants,
            schedule: self.parameter_schedule(&grid)?,
            initial: self.initial.clone(),
            t_final: self.t_final,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Config reproducing a scenario. Cell-map masks need a file and are
    /// rejected.
    pub fn from_scenario(s: &Scenario, solver: Solver, dt: f64) -> Result<RunConfig> {
        let mask = match s.schedule.mask() {
            RegionMask::Uniform => MaskSpec::Uniform,
            RegionMask::HorizontalBands {
                band_height,
                phase_offset,
            } => MaskSpec::HorizontalBands {
                band_height: *band_height,
                phase_offset: *phase_offset,
            },
            RegionMask::CellMap(_) => {
                return Err(Error::Unsupported("cell-map schedules need a map file".into()));
            }
        };
        Ok(RunConfig {
            model: s.model,
            solver,
            dt,
            t_final: s.t_final,
            seed: 0,
            output_dir: PathBuf::from(format!("runs/{}", s.name)),
            grid: GridSpec {
                n: s.grid.n,
                m: Some(s.grid.m),
                dr: s.grid.dr,
                bc_x: s.grid.bc_x,
                bc_y: s.grid.bc_y,
            },
            constants: s.constants,
            schedule: ScheduleSpec {
                mask,
                rows: s.schedule.rows().iter().map(RowSpec::from_row).collect(),
            },
            initial: s.initial.clone(),
            splitting: SplittingPolicy::default(),
            recording: RecordingSpec::default(),
            perturbation: PerturbationSpec::default(),
            results: None,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.output_dir);
        if let InitialCondition::FromFile { path } = &mut self.initial {
            resolve(path);
        }
        if let MaskSpec::CellMap { path } = &mut self.schedule.mask {
            resolve(path);
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Unsupported(format!("cannot serialise config: {e}")))
    }
}

fn rekey(e: Error, prefix: &str) -> Error {
    match e {
        Error::Validation { key, reason } => Error::validation(format!("{prefix}.{key}"), reason),
        Error::InvalidSchedule(reason) => Error::validation(prefix, reason),
        other => other,
    }
}

/// Parses and validates a config file. Relative paths inside it are taken
/// relative to the file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
    config.resolve_paths(&base);
    config.validate()?;
    Ok(config)
}

/// 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_csv(series: &[SeriesRecord]) -> String {
    let mut out = String::with_capacity(64 * (series.len() + 1));
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in series {
        let l2 = r.l2_perturbation.map(format_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            format_f64(r.time),
            format_f64(r.free_energy),
            format_f64(r.mass),
            l2,
            format_f64(r.max_abs_phi)
        )
        .expect("write to string");
    }
    out
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: `{s}`: {e}"),
    })
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<SeriesRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SERIES_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected header `{SERIES_HEADER}`"),
        });
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: expected 6 columns", k + 2),
                });
            }
            let step = cols[0].parse::<usize>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", k + 2),
            })?;
            Ok(SeriesRecord {
                step,
                time: parse_f64(path, k + 2, cols[1])?,
                free_energy: parse_f64(path, k + 2, cols[2])?,
                mass: parse_f64(path, k + 2, cols[3])?,
                l2_perturbation: if cols[4].is_empty() {
                    None
                } else {
                    Some(parse_f64(path, k + 2, cols[4])?)
                },
                max_abs_phi: parse_f64(path, k + 2, cols[5])?,
            })
        })
        .collect()
}

pub fn snapshot_csv(values: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn read_matrix<T>(path: &Path, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Array2<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let before = data.len();
        for cell in line.split(',') {
            data.push(parse(cell.trim()).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {message}", k + 1),
            })?);
        }
        let w = data.len() - before;
        if *width.get_or_insert(w) != w {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: expected {} values, found {w}", k + 1, width.unwrap()),
            });
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: "no data".into(),
    })?;
    Ok(Array2::from_shape_vec((rows, width), data).expect("rectangular"))
}

/// Reads a snapshot CSV (one line per grid row).
pub fn read_snapshot_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    read_matrix(path.as_ref(), |s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
}

/// Reads a region-id CSV (one line per grid row).
pub fn read_cell_map_csv(path: impl AsRef<Path>) -> Result<Array2<u32>> {
    read_matrix(path.as_ref(), |s| s.parse::<u32>().map_err(|e| format!("`{s}`: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub n: usize,
    pub m: usize,
    pub dr: f64,
    pub bc_x: BoundaryCondition,
    pub bc_y: BoundaryCondition,
    pub time: f64,
    pub step: usize,
}

pub fn snapshot_stem(time: f64) -> String {
    format!("snapshot_t{time}")
}

/// Writes `<stem>.csv` and `<stem>.toml` into `dir`.
pub fn write_snapshot(dir: &Path, snapshot: &Snapshot) -> Result<(PathBuf, PathBuf)> {
    let g = snapshot.field.grid();
    let stem = snapshot_stem(snapshot.time);
    let csv = dir.join(format!("{stem}.csv"));
    let meta = dir.join(format!("{stem}.toml"));
    write_file(&csv, &snapshot_csv(snapshot.field.values()))?;
    let record = SnapshotMeta {
        n: g.n,
        m: g.m,
        dr: g.dr,
        bc_x: g.bc_x,
        bc_y: g.bc_y,
        time: snapshot.time,
        step: snapshot.step,
    };
    write_file(&meta, &toml::to_string(&record).expect("plain struct"))?;
    Ok((csv, meta))
}

pub fn read_snapshot(csv: impl AsRef<Path>) -> Result<(SnapshotMeta, Field)> {
    let csv = csv.as_ref();
    let meta_path = csv.with_extension("toml");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: SnapshotMeta = toml::from_str(&text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    let grid = Grid::new(meta.n, meta.m, meta.dr, meta.bc_y, meta.bc_x)?;
    let field = Field::from_values(grid, read_snapshot_csv(csv)?)?;
    Ok((meta, field))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Creates `dir` for a new run. An existing non-empty directory is an error
/// unless `force`, in which case it is removed first.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_none();
        if !empty {
            if !force {
                return Err(Error::validation(
                    "output_dir",
                    format!("{} already exists; pass --force to replace it", dir.display()),
                ));
            }
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes series, snapshots and manifest for a finished run into
/// `config.output_dir`. Returns the paths written.
pub fn write_outputs(result: &RunResult, config: &RunConfig, summary: &RunSummary, force: bool) -> Result<Vec<PathBuf>> {
    let dir = &config.output_dir;
    prepare_output_dir(dir, force)?;
    let mut written = Vec::new();
    let series = dir.join(SERIES_FILE);
    write_file(&series, &series_csv(&result.series))?;
    written.push(series);
    for snap in &result.snapshots {
        let (csv, meta) = write_snapshot(dir, snap)?;
        written.push(csv);
        written.push(meta);
    }
    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, config, summary)?;
    written.push(manifest);
    Ok(written)
}

pub fn write_manifest(path: &Path, config: &RunConfig, summary: &RunSummary) -> Result<()> {
    let mut echoed = config.clone();
    echoed.results = Some(summary.clone());
    write_file(path, &echoed.to_toml()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub dt: f64,
    pub verdict: Verdict,
    pub max_growth: f64,
    pub gradient_stable: bool,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halted_at: Option<usize>,
    pub series_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub config: RunConfig,
    pub dt_cri: f64,
    pub runs: Vec<StabilityEntry>,
}

pub fn write_stability_report(dir: &Path, report: &StabilityReport, series: &BTreeMap<String, String>) -> Result<PathBuf> {
    for (name, csv) in series {
        write_file(&dir.join(name), csv)?;
    }
    let path = dir.join("stability.toml");
    let text = toml::to_string(report).map_err(|e| Error::Unsupported(format!("cannot serialise report: {e}")))?;
    write_file(&path, &text)?;
    Ok(path)
}
