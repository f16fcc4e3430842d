//! Configuration, run orchestration and persistence.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, PresetKind, RunConfig};
pub use run::{
    assess_series, prepare, recompute_repr, run_refinement, run_single, run_sweep, simulate,
    Order, RefinementTable, RunStatus, RunSummary, SeriesAssessment, Simulation, SweepRow,
};
