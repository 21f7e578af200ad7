//! Experiment orchestration, statistical comparison, configuration and
//! reporting.

pub mod config;
pub mod flt;
pub mod ks;
pub mod metric;
pub mod studies;
pub mod svg;

pub use config::{ExperimentConfig, SEED_ENV};
pub use flt::{emit_report, MASTER_SEEDS, report_json, resolve_triple, run_flt_experiment, FltOutcome, FltReport};
pub use ks::{ks_two_sample, KsResult};
pub use metric::{run_metric_suite, MetricSuite};
pub use studies::{run_diagnose, run_tail_study, run_theta_study};
