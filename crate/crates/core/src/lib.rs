//! Simulation and verification toolkit for functional limit theorems of
//! heavy-tailed dependent partial sums.
//!
//! The crate is organised bottom-up:
//!
//! - [`cadlag`]: step paths, completed graphs, uniform / L1 / M1 distances.
//! - [`pointproc`]: exceedance point measures and the summation functional.
//! - [`models`]: regularly varying stationary series and their normalisation.
//! - [`tailproc`]: tail and spectral processes, extremal index, Lévy triples.
//! - [`estimators`]: extremal index estimators and dependence diagnostics.
//! - [`limits`]: stable Lévy limit paths and limiting cluster point processes.
//! - [`harness`]: experiments, two-sample tests, configuration and reports.

pub mod cadlag;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod limits;
pub mod models;
pub mod pointproc;
pub mod rng;
pub mod stats;
pub mod tailproc;

pub use cadlag::{l1_distance, m1_distance, uniform_distance, CadlagPath, CompletedGraph};
pub use error::{Error, Result};
pub use pointproc::{build_time_space_measure, lambda_membership, summation_functional, Atom, LambdaReport, PointMeasure};
pub use stats::Estimate;
pub use estimators::{blocks_estimator, runs_estimator, BlockingScheme};
pub use harness::{run_flt_experiment, ExperimentConfig};
pub use limits::{simulate_limit_marginal, simulate_limit_path, LimitSimulator};
pub use models::{centering_sequence, normalizing_sequence, simulate_series, MarginalSpec, ModelSpec};
pub use tailproc::{extremal_index_ma, garch_cplus, levy_triple_ma, LevyTriple, MaTailSampler, TailSampler};
