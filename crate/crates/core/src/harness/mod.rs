//! Run configuration, experiment recipes and the command drivers used by the CLI.

pub mod commands;
pub mod config;
pub mod experiments;

pub use commands::{evaluate, ingest_android, simulate, sweep_eta, train};
pub use config::{EvalSubset, EvaluateConfig, InitSource, RunConfig, SweepConfig};
pub use experiments::{evaluate_model, run_pipeline, Evaluation, PipelineResult};
