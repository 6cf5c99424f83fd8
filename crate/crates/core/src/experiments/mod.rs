//! Benchmark scenarios and the experiment harnesses run on them: fixed-step
//! simulation, perturbation (von Neumann) stability, energy monotonicity,
//! mass conservation, per-step scaling, and interface shape metrics.

pub mod bench;
pub mod contour;
pub mod run;
pub mod scenario;
pub mod stability;

pub use bench::{fit_power_law, scaling_benchmark, DtRule, ScalingReport, ScalingRow};
pub use contour::{circularity, zero_contour_metrics, ContourMetrics};
pub use run::{
    run_from, run_simulation, run_to_steady_state, step_count, RecordingSpec, RunResult, SeriesRecord, Snapshot, Solver,
    Stepper,
};
pub use scenario::{build_scenario, InitialCondition, Overrides, Scenario, ScenarioName};
pub use stability::{
    conservation_check, gradient_stability_check, perturb, perturbation_stability_test, PerturbationOutcome,
    PerturbationSpec, Verdict,
};
