//! Experiment harness behind the `aircomp` binary.

pub mod config;
pub mod harness;

pub use config::{ExperimentConfig, Preset};
pub use harness::{run_duality_bench, run_e2e, run_feedback_demo, run_sweep, ResultRow, SweepVariable};
