use std::path::PathBuf;

use thiserror::Error;

/// Every failure surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum HomogError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("coefficient is not elliptic: sample {index} = {value}")]
    NonElliptic { index: usize, value: f64 },

    #[error("non-finite sample at index {index} in {field}")]
    NonFinite { field: &'static str, index: usize },

    #[error("potential violates the zero y-mean condition: |mean| = {mean:e} at tau slice {slice}")]
    ZeroMeanViolated { slice: usize, mean: f64 },

    #[error("{what} did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("effective tensor asymmetry {defect:e} exceeds {tolerance:e}")]
    AsymmetryExceeded { defect: f64, tolerance: f64 },

    #[error("effective potential shift is negative ({mu:e}); (V, eta) pair is inconsistent")]
    NegativeMu { mu: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailed(String),

    #[error("mesh too coarse: h = {h:e} exceeds eps/{factor} = {limit:e}")]
    MeshTooCoarse { h: f64, factor: f64, limit: f64 },

    #[error("time step too coarse: dt = {dt:e} exceeds eps/{factor} = {limit:e}")]
    TimeStepTooCoarse { dt: f64, factor: f64, limit: f64 },

    #[error("effective tensor is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("test function y-factor must have zero mean (mean = {mean:e})")]
    MeanZeroRequired { mean: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("schema violation at `{key}`: {message}")]
    SchemaViolation { key: String, message: String },

    #[error("unsatisfiable resolution: {0}")]
    UnsatisfiableResolution(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed array file: {0}")]
    Format(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<HomogError>,
    },
}

impl HomogError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HomogError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: impl Into<String>) -> Self {
        HomogError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = HomogError> = std::result::Result<T, E>;
