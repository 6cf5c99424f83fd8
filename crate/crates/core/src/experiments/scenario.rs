use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::PhysicalConstants;
use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, Field, Grid};
use crate::schedule::{banded_ac_rows, banded_ch_rows, uniform_schedule, ParameterSchedule, RegionMask};
use crate::Model;

/// Seed of the noisy start used by the banded scenarios.
pub const DEFAULT_NOISE_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    AcSharpInterface,
    ChSquareInclusion,
    AcBanded,
    ChBanded,
    ChLayerRetraction,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::AcSharpInterface,
        ScenarioName::ChSquareInclusion,
        ScenarioName::AcBanded,
        ScenarioName::ChBanded,
        ScenarioName::ChLayerRetraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::AcSharpInterface => "ac_sharp_interface",
            ScenarioName::ChSquareInclusion => "ch_square_inclusion",
            ScenarioName::AcBanded => "ac_banded",
            ScenarioName::ChBanded => "ch_banded",
            ScenarioName::ChLayerRetraction => "ch_layer_retraction",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `-1` left of the vertical mid-line, `+1` right of it.
    SharpInterfaceX,
    /// Centred square of side `side_fraction` times the shorter domain edge.
    SquareInclusion { side_fraction: f64, inside: f64, outside: f64 },
    /// I.i.d. uniform values in `[-amplitude, amplitude]`, row-major draw order.
    UniformNoise { amplitude: f64, seed: u64 },
    /// Horizontal strip through the domain centre, attached to the left wall.
    Layer {
        thickness_fraction: f64,
        length_fraction: f64,
        inside: f64,
        outside: f64,
    },
    /// Snapshot CSV with one line per row.
    FromFile { path: PathBuf },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        let fraction = |key: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must lie in (0, 1], got {v}")))
            }
        };
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(key, "must be finite"))
            }
        };
        match *self {
            InitialCondition::SharpInterfaceX | InitialCondition::FromFile { .. } => Ok(()),
            InitialCondition::SquareInclusion {
                side_fraction,
                inside,
                outside,
            } => {
                fraction("initial.side_fraction", side_fraction)?;
                finite("initial.inside", inside)?;
                finite("initial.outside", outside)
            }
            InitialCondition::UniformNoise { amplitude, .. } => {
                if amplitude >= 0.0 && amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(Error::validation("initial.amplitude", format!("must be >= 0, got {amplitude}")))
                }
            }
            InitialCondition::Layer {
                thickness_fraction,
                length_fraction,
                inside,
                outside,
            } => {
                fraction("initial.thickness_fraction", thickness_fraction)?;
                fraction("initial.length_fraction", length_fraction)?;
                finite("initial.inside", inside)?;
                finite("initial.outside", outside)
            }
        }
    }

    pub fn realize(&self, grid: &Grid) -> Result<Field> {
        self.validate()?;
        let (w, h) = (grid.width(), grid.height());
        let field = match self {
            InitialCondition::SharpInterfaceX => {
                Field::from_fn(*grid, |i, j| if grid.coords(i, j).0 < 0.5 * w { -1.0 } else { 1.0 })
            }
            InitialCondition::SquareInclusion {
                side_fraction,
                inside,
                outside,
            } => {
                let half = 0.5 * side_fraction * w.min(h);
                Field::from_fn(*grid, |i, j| {
                    let (x, y) = grid.coords(i, j);
                    if (x - 0.5 * w).abs() < half && (y - 0.5 * h).abs() < half {
                        *inside
                    } else {
                        *outside
                    }
                })
            }
            InitialCondition::UniformNoise { amplitude, seed } => {
                if *amplitude == 0.0 {
                    Field::zeros(*grid)
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    Field::from_fn(*grid, |_, _| rng.random_range(-amplitude..=*amplitude))
                }
            }
            InitialCondition::Layer {
                thickness_fraction,
                length_fraction,
                inside,
                outside,
            } => {
                let half = 0.5 * thickness_fraction * h;
                let length = length_fraction * w;
                Field::from_fn(*grid, |i, j| {
                    let (x, y) = grid.coords(i, j);
                    if (y - 0.5 * h).abs() < half && x < length {
                        *inside
                    } else {
                        *outside
                    }
                })
            }
            InitialCondition::FromFile { path } => {
                let values = crate::io::read_snapshot_csv(path)?;
                Field::from_values(*grid, values)?
            }
        };
        Ok(field)
    }
}

/// Changes applied on top of a preset scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Square grid of `size x size`. Presets on a fixed domain keep the
    /// domain and rescale `dr`; the banded presets keep `dr` (and the band
    /// height in cells).
    pub size: Option<usize>,
    pub dr: Option<f64>,
    pub gamma: Option<f64>,
    pub t_final: Option<f64>,
    pub bc: Option<BoundaryCondition>,
    pub initial: Option<InitialCondition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: Grid,
    pub model: Model,
    pub constants: PhysicalConstants,
    pub schedule: ParameterSchedule,
    pub initial: InitialCondition,
    pub t_final: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.constants.validate()?;
        self.initial.validate()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::validation("t_final", format!("must be positive, got {}", self.t_final)));
        }
        let end = self.schedule.t_end();
        if end < self.t_final * (1.0 - 1e-12) {
            return Err(Error::validation(
                "schedule",
                format!("rows end at t = {end} but t_final = {}", self.t_final),
            ));
        }
        if let RegionMask::CellMap(ids) = self.schedule.mask() {
            if ids.dim() != self.grid.shape() {
                return Err(Error::validation(
                    "schedule.mask",
                    format!("cell map is {:?}, grid is {:?}", ids.dim(), self.grid.shape()),
                ));
            }
        }
        Ok(())
    }

    pub fn initial_field(&self) -> Result<Field> {
        self.initial.realize(&self.grid)
    }

    /// Sets `t_final`, stretching the last schedule row if needed.
    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.schedule.hold_last_until(t_final);
        self.t_final = t_final;
        self
    }
}

struct Preset {
    model: Model,
    n: usize,
    m: usize,
    dr: f64,
    keep_domain: bool,
    bc: BoundaryCondition,
    gamma: f64,
    t_final: f64,
    initial: InitialCondition,
}

fn preset(name: ScenarioName) -> Preset {
    match name {
        ScenarioName::AcSharpInterface => Preset {
            model: Model::AllenCahn,
            n: 500,
            m: 500,
            dr: 1.0 / 500.0,
            keep_domain: true,
            bc: BoundaryCondition::Neumann,
            gamma: 0.01,
            t_final: 5.0,
            initial: InitialCondition::SharpInterfaceX,
        },
        ScenarioName::ChSquareInclusion => Preset {
            model: Model::CahnHilliard,
            n: 100,
            m: 100,
            dr: 0.01,
            keep_domain: true,
            bc: BoundaryCondition::Periodic,
            gamma: 4e-4,
            t_final: 1.0,
            initial: InitialCondition::SquareInclusion {
                side_fraction: 0.4,
                inside: 1.0,
                outside: -1.0,
            },
        },
        ScenarioName::AcBanded | ScenarioName::ChBanded => Preset {
            model: if name == ScenarioName::AcBanded {
                Model::AllenCahn
            } else {
                Model::CahnHilliard
            },
            n: 50,
            m: 50,
            dr: 0.02,
            keep_domain: false,
            bc: BoundaryCondition::Periodic,
            gamma: 0.01,
            t_final: 0.2,
            initial: InitialCondition::UniformNoise {
                amplitude: 0.1,
                seed: DEFAULT_NOISE_SEED,
            },
        },
        ScenarioName::ChLayerRetraction => Preset {
            model: Model::CahnHilliard,
            n: 400,
            m: 800,
            dr: 1e-4,
            keep_domain: true,
            bc: BoundaryCondition::Neumann,
            gamma: 4e-8,
            t_final: 1.0,
            initial: InitialCondition::Layer {
                thickness_fraction: 0.2,
                length_fraction: 0.6,
                inside: 1.0,
                outside: -1.0,
            },
        },
    }
}

/// Builds a preset benchmark configuration.
pub fn build_scenario(name: ScenarioName, overrides: &Overrides) -> Result<Scenario> {
    let p = preset(name);
    let (mut n, mut m, mut dr) = (p.n, p.m, p.dr);
    if let Some(size) = overrides.size {
        if size < 3 {
            return Err(Error::InvalidSize { size });
        }
        if p.keep_domain {
            dr = p.dr * p.m as f64 / size as f64;
            n = (p.n * size).div_ceil(p.m).max(3);
        } else {
            n = size;
        }
        m = size;
    }
    if let Some(d) = overrides.dr {
        dr = d;
    }
    let bc = overrides.bc.unwrap_or(p.bc);
    let grid = Grid::new(n, m, dr, bc, bc)?;
    let gamma = overrides.gamma.unwrap_or(p.gamma);
    let t_final = overrides.t_final.unwrap_or(p.t_final);
    let constants = PhysicalConstants::new(gamma, 1.0)?;
    let schedule = match name {
        ScenarioName::AcBanded | ScenarioName::ChBanded => {
            let rows = if name == ScenarioName::AcBanded {
                banded_ac_rows()
            } else {
                banded_ch_rows()
            };
            let mut s = ParameterSchedule::new(
                RegionMask::HorizontalBands {
                    band_height: 10,
                    phase_offset: 0,
                },
                rows,
            )?;
            s.hold_last_until(t_final);
            s
        }
        _ => uniform_schedule(-2.0, 0.0, t_final)?,
    };
    let scenario = Scenario {
        name: name.to_string(),
        grid,
        model: p.model,
        constants,
        schedule,
        initial: overrides.initial.clone().unwrap_or(p.initial),
        t_final,
    };
    scenario.validate()?;
    Ok(scenario)
}
