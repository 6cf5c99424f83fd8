//! Finite-difference phase-field solvers for the Allen-Cahn and
//! Cahn-Hilliard equations with spatially and temporally varying parameters.
//!
//! Two families of time steppers are provided:
//!
//! - explicit forward-Euler steps, limited by the von Neumann condition;
//! - unconditionally gradient-stable semi-implicit steps obtained from a
//!   convex splitting of the `T phi^2` term, solved directly (no iteration)
//!   by diagonalising the per-axis Laplacian matrices.
//!
//! The free energy density is `f = phi^4 + T phi^2 + h phi`, with `T` and `h`
//! given per cell and per time interval by a [`schedule::ParameterSchedule`].
//!
//! ```no_run
//! use phasefield::experiments::{build_scenario, run_simulation, RecordingSpec, ScenarioName, Overrides, Solver};
//! use phasefield::splitting::SplittingPolicy;
//!
//! let scenario = build_scenario(ScenarioName::AcSharpInterface, &Overrides { size: Some(128), ..Default::default() }).unwrap();
//! let result = run_simulation(&scenario, Solver::Implicit, 1e-2, &SplittingPolicy::default(), &RecordingSpec::default()).unwrap();
//! println!("final energy {}", result.series.last().unwrap().free_energy);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod cli;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod explicit;
pub mod grid;
pub mod implicit;
pub mod io;
pub mod schedule;
pub mod spectral;
pub mod splitting;

pub use error::{Error, Result};
pub use grid::{BoundaryCondition, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "ac")]
    AllenCahn,
    #[serde(rename = "ch")]
    CahnHilliard,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::AllenCahn => "ac",
            Model::CahnHilliard => "ch",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" | "allen-cahn" | "allen_cahn" => Ok(Model::AllenCahn),
            "ch" | "cahn-hilliard" | "cahn_hilliard" => Ok(Model::CahnHilliard),
            other => Err(Error::validation("model", format!("unknown model `{other}`"))),
        }
    }
}
