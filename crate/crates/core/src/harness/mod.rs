//! Experiment orchestration: configuration, replications, persistence and reporting.

pub mod config;
pub mod experiment;
pub mod report;
pub mod runner;
pub mod veto;

pub use config::{
    DatasetConfig, DatasetSource, ExperimentConfig, ExperimentSettings, ModelConfig, OUTPUT_DIR_ENV,
};
pub use experiment::{load_record, run_experiment, write_atomic, ReplicationFailure, RunRecord};
pub use report::{emit_report, line_chart, Series};
pub use runner::{run_replication, Replication};
pub use veto::{veto_demo, VetoDemo};
