//! End-to-end sweep: cell problems and effective model once, then the fine,
//! homogenized and diagnostic stages for every `eps`.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use crate::cell::{
    validate_coefficient, validate_potential, CoefficientDiagnostics, CoefficientField, PotentialDiagnostics,
    PotentialField,
};
use crate::effective::{assemble_model, CellSolution, EffectiveModel};
use crate::error::{HomogError, Result};
use crate::fine::{solve_fine, FineProblem};
use crate::grid::PeriodicGrid;
use crate::homogenized::{operator_spectrum_check, solve_homogenized, MacroProblem, SpectrumReport};
use crate::io::write_wave_field;
use crate::twoscale::{
    corrector_pairing, first_order_field, gradient_limit_pairing, gradient_two_scale_pairing, limit_pairing,
    limit_system_residual, reconstruct_u1, space_time_l2_error, two_scale_pairing, SlowFactor, TestFunction,
    TestPair, TrigPolynomial, TrigTerm,
};
use crate::wave::{energy_norms, relative_mass_drift};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "HOMOG_WORKERS";

/// Worker count: explicit request, then `HOMOG_WORKERS`, then the config
/// value; 0 anywhere means all available cores.
pub fn resolve_workers(requested: Option<usize>, configured: usize) -> usize {
    let env = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    let w = requested.or(env).unwrap_or(configured);
    if w == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        w
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub n: usize,
    pub steps: usize,
    /// `||u_eps - u0||_{L2(Q)}`
    pub error_zeroth: f64,
    /// `||u_eps - (u0 + eps u1)||_{L2(Q)}`
    pub error_first: f64,
    /// Largest `|two-scale pairing - limit|` over the test functions.
    pub two_scale_residual: f64,
    /// Largest `|corrector pairing - limit|` over the test functions.
    pub corrector_residual: f64,
    /// Largest modulus of the limit-system residual over the test pairs.
    pub limit_residual: f64,
    pub mass_drift: f64,
    pub macro_mass_drift: f64,
    pub l2q: f64,
    pub l2h1: f64,
}

/// One diagnostic value with its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub diagnostic: String,
    pub epsilon: f64,
    pub value: Complex64,
    pub reference: Complex64,
    pub residual: f64,
}

impl DiagnosticRecord {
    fn new(diagnostic: String, epsilon: f64, value: Complex64, reference: Complex64) -> Self {
        Self {
            diagnostic,
            epsilon,
            value,
            reference,
            residual: (value - reference).norm(),
        }
    }
}

/// Computed pass/fail statements; `None` when fewer than two rows exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Verdicts {
    pub zeroth_order_decreasing: Option<bool>,
    pub first_order_not_worse: Option<bool>,
    /// `max l2h1 / min l2h1 < 2` across the sweep (reported, not enforced).
    pub l2h1_within_factor_two: Option<bool>,
    /// `log(e_i / e_{i+1}) / log(eps_i / eps_{i+1})` for the zeroth-order error.
    pub observed_orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub cell_seconds: f64,
    pub per_epsilon_seconds: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: SweepConfig,
    pub model: EffectiveModel,
    pub coefficient: CoefficientDiagnostics,
    pub potential: PotentialDiagnostics,
    pub spectrum: SpectrumReport,
    pub rows: Vec<EpsilonRow>,
    pub diagnostics: Vec<DiagnosticRecord>,
    pub verdicts: Verdicts,
    pub timings: Timings,
}

/// Configured test functions followed by the seeded random ones.
pub fn test_functions(cfg: &SweepConfig) -> Vec<TestFunction> {
    let mut out = cfg.diagnostics.test_functions.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let d = cfg.problem.dim;
    for _ in 0..cfg.diagnostics.random_test_functions {
        let mut wave: Vec<i32> = (0..d).map(|_| rng.random_range(0..=2)).collect();
        if wave.iter().all(|&k| k == 0) {
            wave[0] = 1;
        }
        let y_factor = TrigPolynomial {
            constant: 0.0,
            terms: vec![TrigTerm {
                amplitude: 1.0,
                wave,
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }],
        };
        let tau_factor = TrigPolynomial {
            constant: 0.0,
            terms: vec![TrigTerm {
                amplitude: 1.0,
                wave: vec![rng.random_range(0..=2)],
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }],
        };
        out.push(TestFunction {
            slow: SlowFactor::default(),
            y_factor,
            tau_factor,
        });
    }
    out
}

/// Cell-level stages shared by every `eps`.
#[derive(Debug, Clone)]
pub struct CellStage {
    pub coefficient: CoefficientField,
    pub potential: PotentialField,
    pub solution: CellSolution,
    pub coefficient_diagnostics: CoefficientDiagnostics,
    pub potential_diagnostics: PotentialDiagnostics,
}

pub fn run_cell_stage(cfg: &SweepConfig) -> Result<CellStage> {
    let p = &cfg.problem;
    let grid = PeriodicGrid::new(p.dim, cfg.cell.m, cfg.cell.k).map_err(|e| e.in_stage("cell_grid"))?;
    let coefficient = CoefficientField::from_spec(&p.coefficient, grid);
    let potential = PotentialField::from_spec(&p.potential, grid);
    let coefficient_diagnostics =
        validate_coefficient(&coefficient).map_err(|e| e.in_stage("validate_coefficient"))?;
    let potential_diagnostics = validate_potential(&potential, &cfg.sweep.epsilons, p.horizon)
        .map_err(|e| e.in_stage("validate_potential"))?;
    let solution = assemble_model(&coefficient, &potential, &grid, &cfg.cell.options())?;
    Ok(CellStage {
        coefficient,
        potential,
        solution,
        coefficient_diagnostics,
        potential_diagnostics,
    })
}

struct EpsilonOutcome {
    row: EpsilonRow,
    diagnostics: Vec<DiagnosticRecord>,
    seconds: f64,
}

fn run_epsilon(
    cfg: &SweepConfig,
    cell: &CellStage,
    tests: &[TestFunction],
    index: usize,
    epsilon: f64,
    fields_dir: Option<&Path>,
) -> Result<EpsilonOutcome> {
    let start = Instant::now();
    let p = &cfg.problem;
    let stage = |name: &str| format!("{name}[eps={epsilon}]");
    let fine = FineProblem::resolved(
        p.dim,
        epsilon,
        p.horizon,
        p.coefficient.clone(),
        p.potential.clone(),
        p.source.clone(),
        p.initial.clone(),
        cfg.resolution.rule(),
    )
    .map_err(|e| e.in_stage(stage("fine_problem")))?;
    let ue = solve_fine(&fine).map_err(|e| e.in_stage(stage("solve_fine")))?;
    let macro_problem = MacroProblem {
        model: cell.solution.model.clone(),
        grid: fine.grid,
        source: p.source.clone(),
        initial: p.initial.clone(),
    };
    let u0 = solve_homogenized(&macro_problem).map_err(|e| e.in_stage(stage("solve_homogenized")))?;
    let recon = reconstruct_u1(&u0, &cell.solution.correctors, &cell.solution.eta)
        .map_err(|e| e.in_stage(stage("reconstruct_u1")))?;
    let first = first_order_field(&recon, epsilon);
    let error_zeroth = space_time_l2_error(&ue, &u0).map_err(|e| e.in_stage(stage("error_zeroth")))?;
    let error_first = space_time_l2_error(&ue, &first).map_err(|e| e.in_stage(stage("error_first")))?;

    let mut diagnostics = Vec::new();
    let mut two_scale_residual: f64 = 0.0;
    let mut corrector_residual: f64 = 0.0;
    for (i, psi) in tests.iter().enumerate() {
        let value = two_scale_pairing(&ue, psi, epsilon);
        let reference = limit_pairing(&u0, None, psi).map_err(|e| e.in_stage(stage("limit_pairing")))?;
        let rec = DiagnosticRecord::new(format!("two_scale[{i}]"), epsilon, value, reference);
        two_scale_residual = two_scale_residual.max(rec.residual);
        diagnostics.push(rec);

        let value =
            corrector_pairing(&ue, psi, epsilon).map_err(|e| e.in_stage(stage("corrector_pairing")))?;
        let reference =
            limit_pairing(&u0, Some(&recon), psi).map_err(|e| e.in_stage(stage("limit_pairing")))?;
        let rec = DiagnosticRecord::new(format!("corrector[{i}]"), epsilon, value, reference);
        corrector_residual = corrector_residual.max(rec.residual);
        diagnostics.push(rec);

        for axis in 0..p.dim {
            let value = gradient_two_scale_pairing(&ue, psi, epsilon, axis);
            let reference = gradient_limit_pairing(&recon, psi, axis);
            diagnostics.push(DiagnosticRecord::new(
                format!("gradient[{i}].x{axis}"),
                epsilon,
                value,
                reference,
            ));
        }
    }
    let pairs: Vec<TestPair> = tests
        .iter()
        .map(|psi| TestPair {
            psi0: SlowFactor::default(),
            psi0_scale: 1.0,
            psi1: psi.clone(),
        })
        .collect();
    let residual = limit_system_residual(&recon, &pairs, &cell.coefficient, &cell.potential, &p.source)
        .map_err(|e| e.in_stage(stage("limit_system_residual")))?;
    for (i, r) in residual.per_pair.iter().enumerate() {
        diagnostics.push(DiagnosticRecord::new(
            format!("limit_system[{i}]"),
            epsilon,
            *r,
            Complex64::default(),
        ));
    }
    let norms = energy_norms(&ue);
    let row = EpsilonRow {
        epsilon,
        n: fine.grid.n,
        steps: fine.grid.steps,
        error_zeroth,
        error_first,
        two_scale_residual,
        corrector_residual,
        limit_residual: residual.max_modulus,
        mass_drift: relative_mass_drift(&ue),
        macro_mass_drift: relative_mass_drift(&u0),
        l2q: norms.l2q,
        l2h1: norms.l2h1,
    };
    if let Some(dir) = fields_dir {
        for (name, field) in [("fine", &ue), ("homogenized", &u0), ("first_order", &first)] {
            write_wave_field(dir.join(format!("{name}_{index}.bin")), field)
                .map_err(|e| e.in_stage(stage("save_fields")))?;
        }
    }
    Ok(EpsilonOutcome {
        row,
        diagnostics,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn compute_verdicts(rows: &[EpsilonRow]) -> Verdicts {
    if rows.len() < 2 {
        return Verdicts::default();
    }
    let decreasing = rows.windows(2).all(|w| w[1].error_zeroth < w[0].error_zeroth);
    let not_worse = rows.iter().all(|r| r.error_first <= r.error_zeroth);
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.l2h1), hi.max(r.l2h1))
    });
    let observed_orders = rows
        .windows(2)
        .map(|w| (w[0].error_zeroth / w[1].error_zeroth).ln() / (w[0].epsilon / w[1].epsilon).ln())
        .collect();
    Verdicts {
        zeroth_order_decreasing: Some(decreasing),
        first_order_not_worse: Some(not_worse),
        l2h1_within_factor_two: Some(hi < 2.0 * lo),
        observed_orders,
    }
}

/// Runs the whole sweep with `workers` concurrent per-eps pipelines (see
/// [`resolve_workers`]); rows come back in configuration order.
pub fn run_pipeline_with(cfg: &SweepConfig, workers: usize) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let start = Instant::now();
    let cell = run_cell_stage(cfg)?;
    let cell_seconds = start.elapsed().as_secs_f64();
    let tests = test_functions(cfg);
    let fields_dir = cfg.output.save_fields.then(|| cfg.output.dir.join("fields"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HomogError::InvalidProblem(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<EpsilonOutcome>> = pool.install(|| {
        cfg.sweep
            .epsilons
            .par_iter()
            .enumerate()
            .map(|(i, &eps)| run_epsilon(cfg, &cell, &tests, i, eps, fields_dir.as_deref()))
            .collect()
    });
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut diagnostics = Vec::new();
    let mut per_epsilon_seconds = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        let o = outcome?;
        rows.push(o.row);
        diagnostics.extend(o.diagnostics);
        per_epsilon_seconds.push(o.seconds);
    }
    let spectrum = operator_spectrum_check(
        &cell.solution.model,
        &crate::wave::SpaceTimeGrid::new(cfg.problem.dim, 15, 1, cfg.problem.horizon)?,
    );
    Ok(ConvergenceReport {
        config: cfg.clone(),
        model: cell.solution.model.clone(),
        coefficient: cell.coefficient_diagnostics,
        potential: cell.potential_diagnostics,
        spectrum,
        verdicts: compute_verdicts(&rows),
        rows,
        diagnostics,
        timings: Timings {
            cell_seconds,
            per_epsilon_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// [`run_pipeline_with`] using the configured worker count.
pub fn run_pipeline(cfg: &SweepConfig) -> Result<ConvergenceReport> {
    run_pipeline_with(cfg, resolve_workers(None, cfg.run.workers))
}
