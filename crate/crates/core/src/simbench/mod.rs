//! Simulated users with rule-based concepts, and the repeated-session
//! experiment used to compare proposal strategies.

mod concept;
mod experiment;
mod labels;

pub use concept::{circle_fraction, Concept, Direction, PrevalenceTarget};
pub use experiment::{
    aggregate, run_experiment, run_single, stratified_holdout, write_csv, ExperimentConfig,
    MetricsRow, MetricsTable, RunFailure, RunTrace, CSV_HEADER, DEFAULT_HOLDOUT, DEFAULT_ROUNDS,
    DEFAULT_RUNS,
};
pub use labels::{
    assign_labels, calibrate_thresholds, calibrate_with_target, simulated_select, CalibratedTask,
    ConceptTask, RunLabels, ALWAYS_TOLERANCE, AVERAGE_TOLERANCE, SIGMOID_SLOPE,
};
