//! Experiment sweeps over strategy x budget x alpha x gap power x seed.
//!
//! A sweep is described by an [`ExperimentConfig`] (TOML). [`run_experiment`]
//! evaluates every grid cell and [`emit_outputs`] writes:
//!
//! * `master.csv`: one row per cell plus mean/std rows for the random strategy
//! * `heatmap_ece.csv`: coverage-saliency ECE by (p, alpha) and budget
//! * `calibrated.csv`: ECE after cross-validated temperature scaling, selective accuracy
//! * `splits.csv`: per-split metrics
//! * `bins/<tag>.csv`, `risk_coverage/<tag>.csv`, `selections/<tag>.csv`
//! * `manifest.toml`: the config and toolkit version, rerunnable as is

mod config;
mod grid;
mod output;
mod run;

pub use config::{DataSource, ExperimentConfig, Manifest, MetricOptions};
pub use grid::{expand_grid, Cell};
pub use output::{emit_outputs, MASTER_COLUMNS};
pub use run::{
    evaluate_cell, per_split_report, run_experiment, CellResult, ExperimentResult, MetricRow, SeedSummary,
};
