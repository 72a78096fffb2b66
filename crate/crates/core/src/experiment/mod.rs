//! Experiment harness: configs, regret against hindsight comparators, the
//! small-margin demo and horizon sweeps.

mod config;
mod demo;
mod hindsight;
pub mod presets;
mod run;
mod sweep;

pub use config::{
    ComparatorMode, ControllerSpec, CostSpec, ExperimentConfig, ScheduleOverrides, SystemSpec,
};
pub use demo::{gamma_advantage_demo, min_cost_closed_form, sandwich_bounds, GammaCurvePoint, GammaDemoReport};
pub use hindsight::{best_linear_in_hindsight, in_stable_class, GridSpec, HindsightResult};
pub use run::{
    run_experiment, Comparator, ComparatorKind, EpisodeResult, ExperimentOutput, RegretReport,
    ResolvedController, RunOptions,
};
pub use sweep::{sublinearity_sweep, SweepReport, SweepRow, SweepVerdict};
