//! Batch front end: experiment configs, sweeps and their artifacts.

pub mod config;
mod experiment;
pub mod plot;
pub mod trace;

pub use config::{parse_config, parse_config_str, ExperimentConfig, TauChoice};
pub use experiment::{
    base_point, build_operator, build_scenario, format_summary, resolve_tau, run_experiment, run_point, run_probe,
    sweep_points, ExperimentReport, RunStatus, RunSummary, Scenario, SweepPoint, SUMMARY_HEADER,
};
pub use trace::{emit_trace, format_probe, format_trace, parse_trace, TRACE_HEADER};
