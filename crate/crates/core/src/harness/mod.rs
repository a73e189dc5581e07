//! Experiment orchestration: configuration, run directories, training,
//! evaluation, ablations and synthetic data.

pub mod config;
pub mod experiment;
pub mod run;
pub mod synth;

pub use config::{resolve, ExperimentConfig, Grid, HOME_ENV};
pub use experiment::{
    ablate, ablation_kv, ablation_table, evaluate_baseline, evaluate_checkpoint, evaluate_model, grid_search,
    hold_out_test_queries, inspect_checkpoint, parse_ablation, parse_baseline_kinds, partition_reports, reports_kv,
    train_and_evaluate, train_model, write_reports, AblationRow, Dataset, GridPoint, Inspection, TrainedRun,
    ABLATION_NAMES, ALL_PARTITION,
};
pub use run::{read_manifest, RunDir, CHECKPOINT_FILE, MANIFEST_FILE, METRICS_FILE, TABLE_FILE, TRAIN_LOG_FILE};
