//! Configuration, sweep pipeline and report files.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{load_config, SweepConfig, SCHEMA_VERSION};
pub use pipeline::{resolve_workers, run_pipeline, run_pipeline_with, ConvergenceReport, WORKERS_ENV};
pub use report::{emit_report, ReportFormat};
