//! Path experiments, safety checks and their CSV outputs.

mod config;
mod experiment;

pub use config::{parse_k_policy, parse_pairs, DatasetSource, ExperimentConfig};
pub use experiment::{
    compute_path_experiment, echo_header, load_dataset, run_path_experiment, verify_safety,
    write_atomic, write_report, write_safety, ExperimentReport, MetricsRow, SafetyReport,
    SafetyRow, SummaryRow, DEVIATION_TOL, METRICS_COLUMNS, SUMMARY_COLUMNS, ZERO_TOL,
};
