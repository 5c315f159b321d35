//! Experiment driver: configuration, Monte Carlo sweeps, single-scenario
//! reports and oracle verification.

pub mod config;
pub mod single;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, ModelParams, SweepKind};
pub use single::{run_single, SingleReport};
pub use sweep::{run_sweep, run_sweep_trials, write_sweep_csv, Method, SweepResult, SweepRow};
pub use verify::{run_verify, VerifyReport};
