//! Python bindings: `import homog`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use homog_core::fine::{solve_fine as solve_fine_core, FineProblem};
use homog_core::harness::pipeline::{run_cell_stage, EpsilonRow};
use homog_core::harness::{emit_report, load_config as load_config_core, resolve_workers, run_pipeline_with};
use homog_core::harness::{ReportFormat, SweepConfig};
use homog_core::HomogError;

fn to_py(e: HomogError) -> PyErr {
    match e {
        HomogError::Parse { .. }
        | HomogError::SchemaViolation { .. }
        | HomogError::UnsatisfiableResolution(_)
        | HomogError::InvalidProblem(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn config(path: &str, seed: Option<u64>) -> PyResult<SweepConfig> {
    let mut cfg = load_config_core(path).map_err(to_py)?;
    if let Some(seed) = seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn row_dict(r: &EpsilonRow) -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("epsilon", r.epsilon),
        ("n", r.n as f64),
        ("steps", r.steps as f64),
        ("error_zeroth", r.error_zeroth),
        ("error_first", r.error_first),
        ("two_scale_residual", r.two_scale_residual),
        ("corrector_residual", r.corrector_residual),
        ("limit_residual", r.limit_residual),
        ("mass_drift", r.mass_drift),
        ("macro_mass_drift", r.macro_mass_drift),
        ("l2q", r.l2q),
        ("l2h1", r.l2h1),
    ])
}

/// Validated configuration, with defaults filled in, as TOML text.
#[pyfunction]
fn load_config(path: &str) -> PyResult<String> {
    Ok(config(path, None)?.to_toml_string())
}

/// Effective model `{"q": [[...]], "b": [...], "mu": float}` for a config.
#[pyfunction]
fn effective_model<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(path, None)?;
    let model = py.detach(|| run_cell_stage(&cfg)).map_err(to_py)?.solution.model;
    let d = PyDict::new(py);
    d.set_item("q", model.q)?;
    d.set_item("b", model.b)?;
    d.set_item("mu", model.mu)?;
    Ok(d)
}

/// Runs the sweep; writes the report files when `out` is given and returns
/// one dict per eps.
#[pyfunction]
#[pyo3(signature = (path, out=None, workers=None, seed=None))]
fn run_sweep(
    py: Python<'_>,
    path: &str,
    out: Option<&str>,
    workers: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<BTreeMap<&'static str, f64>>> {
    let cfg = config(path, seed)?;
    let workers = resolve_workers(workers, cfg.run.workers);
    let report = py.detach(|| run_pipeline_with(&cfg, workers)).map_err(to_py)?;
    if let Some(dir) = out {
        emit_report(&report, dir, &ReportFormat::ALL).map_err(to_py)?;
    }
    Ok(report.rows.iter().map(row_dict).collect())
}

/// Final time level of the oscillatory solution at `epsilon` together with
/// the grid size: `(n, steps, values)`.
#[pyfunction]
fn solve_fine(py: Python<'_>, path: &str, epsilon: f64) -> PyResult<(usize, usize, Vec<Complex64>)> {
    let cfg = config(path, None)?;
    let p = &cfg.problem;
    let problem = FineProblem::resolved(
        p.dim,
        epsilon,
        p.horizon,
        p.coefficient.clone(),
        p.potential.clone(),
        p.source.clone(),
        p.initial.clone(),
        cfg.resolution.rule(),
    )
    .map_err(to_py)?;
    let u = py.detach(|| solve_fine_core(&problem)).map_err(to_py)?;
    let g = *u.grid();
    Ok((g.n, g.steps, u.level(g.steps).to_vec()))
}

#[pymodule]
fn homog(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(effective_model, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fine, m)?)?;
    m.add("SCHEMA_VERSION", homog_core::harness::SCHEMA_VERSION)?;
    Ok(())
}
