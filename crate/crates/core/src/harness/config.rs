//! Sweep configuration (TOML, `schema_version = 1`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::CellSolverOptions;
use crate::descriptors::{CoefficientSpec, InitialSpec, PotentialSpec, SourceSpec};
use crate::error::{HomogError, Result};
use crate::fine::ResolutionRule;
use crate::grid::PeriodicGrid;
use crate::twoscale::{SlowFactor, TestFunction, TrigPolynomial};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    pub horizon: f64,
    pub coefficient: CoefficientSpec,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub source: SourceSpec,
    pub initial: InitialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iterations_per_m")]
    pub max_iterations_per_m: usize,
}

fn default_m() -> usize {
    256
}
fn default_k() -> usize {
    64
}
fn default_tolerance() -> f64 {
    1e-12
}
fn default_iterations_per_m() -> usize {
    10
}

impl Default for CellSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            k: default_k(),
            tolerance: default_tolerance(),
            max_iterations_per_m: default_iterations_per_m(),
        }
    }
}

impl CellSection {
    pub fn options(&self) -> CellSolverOptions {
        CellSolverOptions {
            tolerance: self.tolerance,
            max_iterations_per_m: self.max_iterations_per_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSection {
    #[serde(default = "default_factor")]
    pub space_factor: f64,
    #[serde(default = "default_factor")]
    pub time_factor: f64,
    /// Cap on interior nodes per axis.
    #[serde(default = "default_max_points")]
    pub max_interior_points: usize,
    #[serde(default = "default_memory")]
    pub memory_budget_mb: f64,
}

fn default_factor() -> f64 {
    16.0
}
fn default_max_points() -> usize {
    8191
}
fn default_memory() -> f64 {
    4096.0
}

impl Default for ResolutionSection {
    fn default() -> Self {
        Self {
            space_factor: default_factor(),
            time_factor: default_factor(),
            max_interior_points: default_max_points(),
            memory_budget_mb: default_memory(),
        }
    }
}

impl ResolutionSection {
    pub fn rule(&self) -> ResolutionRule {
        ResolutionRule {
            space_factor: self.space_factor,
            time_factor: self.time_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Also write the per-eps fields as array files.
    #[serde(default)]
    pub save_fields: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            save_fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    /// Concurrent per-eps pipelines; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Mean-zero test functions for the pairing diagnostics.
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<TestFunction>,
    /// Extra random mean-zero test functions drawn from `run.seed`.
    #[serde(default)]
    pub random_test_functions: usize,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            test_functions: default_test_functions(),
            random_test_functions: 0,
        }
    }
}

/// Three mean-zero test functions probing the eta-part, the chi-part and a
/// higher harmonic of the corrector.
pub fn default_test_functions() -> Vec<TestFunction> {
    vec![
        TestFunction::new(
            TrigPolynomial::cosine(&[1], 0.0),
            TrigPolynomial::cosine(&[1], 0.0),
        ),
        TestFunction {
            slow: SlowFactor {
                power: 1,
                modes: vec![2, 2],
                time_mode: 1,
            },
            y_factor: TrigPolynomial::cosine(&[1], -std::f64::consts::FRAC_PI_2),
            tau_factor: TrigPolynomial::constant(1.0),
        },
        TestFunction::new(
            TrigPolynomial::cosine(&[2], 0.3),
            TrigPolynomial::cosine(&[1], 0.5),
        ),
    ]
}

/// Fully validated sweep configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default)]
    pub resolution: ResolutionSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

fn violation(key: &str, message: impl Into<String>) -> HomogError {
    HomogError::SchemaViolation {
        key: key.into(),
        message: message.into(),
    }
}

/// Dotted key of the entry enclosing byte offset `at` in TOML source.
fn key_at(source: &str, at: usize) -> Option<String> {
    let before = &source[..at.min(source.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = source[line_start..]
        .find('\n')
        .map_or(source.len(), |i| line_start + i);
    let line = source[line_start..line_end].trim();
    let table = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    let key = if line.starts_with('[') {
        None
    } else {
        line.split('=')
            .next()
            .map(|k| k.trim().to_string())
            .filter(|k| !k.is_empty())
    };
    match (table, key) {
        (Some(t), Some(k)) => Some(format!("{t}.{k}")),
        (Some(t), None) => Some(t),
        (None, k) => k,
    }
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

impl SweepConfig {
    /// Parses and validates TOML text. `origin` is used in error messages.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| HomogError::Parse {
            path: origin.to_string(),
            message: e.message().to_string(),
        })?;
        match value.get("schema_version") {
            Some(toml::Value::Integer(v)) if *v == SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(violation(
                    "schema_version",
                    format!("unsupported version {v}; this build reads version {SCHEMA_VERSION}"),
                ))
            }
            None => return Err(violation("schema_version", "missing")),
        }
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let located = e.span().and_then(|s| key_at(text, s.start));
            let key = match (located, backticked(&message)) {
                (Some(k), Some(field)) if message.contains("unknown field") => format!("{k}.{field}"),
                (Some(k), _) => k,
                (None, Some(field)) => field.to_string(),
                (None, None) => "<root>".to_string(),
            };
            violation(&key, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !(1..=2).contains(&p.dim) {
            return Err(violation("problem.dim", format!("must be 1 or 2, got {}", p.dim)));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(violation("problem.horizon", "must be positive and finite"));
        }
        p.coefficient.check_dim(p.dim)?;
        p.potential.check_dim(p.dim)?;
        let eps = &self.sweep.epsilons;
        if eps.is_empty() {
            return Err(violation("sweep.epsilons", "at least one value is required"));
        }
        if let Some(e) = eps.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(violation("sweep.epsilons", format!("{e} is outside (0, 1)")));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(violation("sweep.epsilons", "values must be strictly decreasing"));
        }
        PeriodicGrid::new(p.dim, self.cell.m, self.cell.k).map_err(|e| violation("cell.m", e.to_string()))?;
        if !(self.cell.tolerance > 0.0) {
            return Err(violation("cell.tolerance", "must be positive"));
        }
        if self.cell.max_iterations_per_m == 0 {
            return Err(violation("cell.max_iterations_per_m", "must be positive"));
        }
        let r = &self.resolution;
        if !(r.space_factor >= 1.0) {
            return Err(violation("resolution.space_factor", "must be at least 1"));
        }
        if !(r.time_factor >= 1.0) {
            return Err(violation("resolution.time_factor", "must be at least 1"));
        }
        for (i, t) in self.diagnostics.test_functions.iter().enumerate() {
            t.check_mean_zero().map_err(|e| {
                violation(
                    &format!("diagnostics.test_functions[{i}].y_factor"),
                    e.to_string(),
                )
            })?;
        }
        for &e in eps {
            self.check_resolution(e)?;
        }
        Ok(())
    }

    /// Rough bytes held at once by one per-eps pipeline: the fine, macro
    /// and first-order fields plus the corrector gradients.
    pub fn estimated_bytes(&self, epsilon: f64) -> f64 {
        let rule = self.resolution.rule();
        let d = self.problem.dim;
        let nodes = ((rule.interior_points(epsilon) + 2) as f64).powi(d as i32);
        let levels = (rule.steps(epsilon, self.problem.horizon) + 1) as f64;
        nodes * levels * 16.0 * (3 + d) as f64
    }

    fn check_resolution(&self, epsilon: f64) -> Result<()> {
        let rule = self.resolution.rule();
        let n = rule.interior_points(epsilon);
        if n > self.resolution.max_interior_points {
            return Err(HomogError::UnsatisfiableResolution(format!(
                "eps = {epsilon} needs {n} interior points per axis, above the cap of {}",
                self.resolution.max_interior_points
            )));
        }
        let mb = self.estimated_bytes(epsilon) / (1024.0 * 1024.0);
        if mb > self.resolution.memory_budget_mb {
            return Err(HomogError::UnsatisfiableResolution(format!(
                "eps = {epsilon} needs about {mb:.0} MB, above the budget of {} MB",
                self.resolution.memory_budget_mb
            )));
        }
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SweepConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HomogError::io(path, e))?;
    SweepConfig::from_toml_str(&text, &path.display().to_string())
}
