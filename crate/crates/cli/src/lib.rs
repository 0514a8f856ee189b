//! Experiment runner for single-shot noise shaping on graphs.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod selftest;

pub use config::{ExperimentConfig, ExperimentKind, GraphSpec, Settings};
pub use error::{CliError, CliResult};
pub use experiments::{
    run, run_and_write, run_bandwidth_sweep, run_bitdepth_scaling, run_comparison, run_halftone,
};
pub use output::{ExperimentOutput, Table};
