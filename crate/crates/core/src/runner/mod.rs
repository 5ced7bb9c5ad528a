//! Experiment orchestration: configs, seeded cell execution, run records and reports.

mod config;
mod experiment;
mod report;

pub use config::{
    DatasetConfig, DatasetKind, ExperimentConfig, ModelConfig, OptimizerEntry, DEFAULT_BLOB_SPREAD,
    DEFAULT_LEARNING_RATE, DEFAULT_SPIRAL_NOISE,
};
pub use experiment::{
    config_hash, derive_seed, run_experiment, setting_id, Aggregate, CellKey, CellOutcome, CellRecord, ExperimentPlan,
    RunRecord,
};
pub use report::{consistency, emit_report, plot_csv, rankings, JsonReport, ReportFormat, CELL_CSV_HEADER};
