//! Configuration, persistence and experiment orchestration behind the CLI.

pub mod config;
pub mod experiment;
pub mod io;
pub mod samples;

pub use config::{ExperimentConfig, Precision};
pub use experiment::{
    evaluate, evaluate_batch, output_root, quadratic, reconstruct, simulate, simulate_in_memory, MetricsRecord,
    QuadraticArgs, ReconstructSummary, OUTPUT_ROOT_ENV,
};
