//! Periodic cell data, structural validation, and the two corrector cell
//! problems solved by Fourier collocation with preconditioned CG.
//!
//! The discrete cell form is `a_hat(w, v) = mean_{Y x Z}( a grad_y w . grad_y v )`
//! with spectral gradients. Correctors solve
//! `a_hat(chi^l, v) = mean(a dv/dy_l)` and `a_hat(eta, v) = mean(V v)` for
//! every discrete periodic `v`, gauged to zero mean per tau slice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::{CoefficientSpec, PotentialSpec};
use crate::error::{HomogError, Result};
use crate::grid::PeriodicGrid;
use crate::linalg::pcg;
use crate::spectral::{SpectralOps, TrigInterpolant};

/// Tolerance on the per-slice y-mean of zero-mean fields.
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-12;

/// Modes below this fraction of the largest coefficient are dropped when a
/// cell field is turned into an interpolant.
const INTERPOLANT_CUTOFF: f64 = 1e-15;

/// Real periodic samples on `Y x Z`, laid out tau-slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: PeriodicGrid,
    samples: Vec<f64>,
}

impl CellField {
    pub fn new(grid: PeriodicGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(HomogError::GridMismatch(format!(
                "{} samples for a grid of {} points",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(HomogError::NonFinite {
                field: "cell field",
                index,
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.len()],
        }
    }

    /// Samples `f(y, tau)` at every grid point.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&[f64], f64) -> f64) -> Self {
        let slice_len = grid.slice_len();
        let samples = (0..grid.len())
            .map(|i| {
                let y = grid.y_point(i % slice_len);
                f(&y[..grid.dim()], grid.tau(i / slice_len))
            })
            .collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.slice_len();
        &self.samples[k * n..(k + 1) * n]
    }

    /// Discrete y-mean of slice `k`.
    pub fn y_mean(&self, k: usize) -> f64 {
        let s = self.slice(k);
        s.iter().sum::<f64>() / s.len() as f64
    }

    pub fn max_abs_y_mean(&self) -> f64 {
        (0..self.grid.k())
            .map(|k| self.y_mean(k).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Periodic trapezoid mean over `Y x Z`.
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.grid.weight()
    }

    pub fn interpolant(&self) -> TrigInterpolant {
        TrigInterpolant::from_samples(
            self.grid.dim(),
            self.grid.m(),
            self.grid.k(),
            &self.samples,
            INTERPOLANT_CUTOFF,
        )
    }

    /// Spectral y-derivative along `axis`, slice by slice.
    pub fn derivative(&self, axis: usize) -> CellField {
        let ops = SpectralOps::new(self.grid.dim(), self.grid.m());
        let samples = (0..self.grid.k())
            .flat_map(|k| ops.derivative(self.slice(k), axis))
            .collect();
        CellField {
            grid: self.grid,
            samples,
        }
    }

    fn from_slices(grid: PeriodicGrid, slices: Vec<Vec<f64>>) -> Self {
        Self {
            grid,
            samples: slices.concat(),
        }
    }
}

/// Y-periodic diffusion coefficient sampled on one slice of the cell grid.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    grid: PeriodicGrid,
    samples: Vec<f64>,
    spec: Option<CoefficientSpec>,
}

impl CoefficientField {
    pub fn from_spec(spec: &CoefficientSpec, grid: PeriodicGrid) -> Self {
        let samples = (0..grid.slice_len())
            .map(|p| spec.eval(&grid.y_point(p)[..grid.dim()]))
            .collect();
        Self {
            grid,
            samples,
            spec: Some(spec.clone()),
        }
    }

    pub fn from_samples(grid: PeriodicGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.slice_len() {
            return Err(HomogError::GridMismatch(format!(
                "{} coefficient samples for {} points per slice",
                samples.len(),
                grid.slice_len()
            )));
        }
        Ok(Self {
            grid,
            samples,
            spec: None,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spec(&self) -> Option<&CoefficientSpec> {
        self.spec.as_ref()
    }

    /// Arithmetic mean over `Y`.
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Harmonic mean over `Y`.
    pub fn harmonic_mean(&self) -> f64 {
        self.samples.len() as f64 / self.samples.iter().map(|a| 1.0 / a).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDiagnostics {
    /// Smallest sample: the observed ellipticity constant.
    pub alpha_eff: f64,
    /// Largest sample (`sup |a|`).
    pub c1: f64,
}

pub fn validate_coefficient(a: &CoefficientField) -> Result<CoefficientDiagnostics> {
    if let Some(index) = a.samples.iter().position(|v| !v.is_finite()) {
        return Err(HomogError::NonFinite {
            field: "coefficient",
            index,
        });
    }
    let (index, &alpha_eff) = a
        .samples
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("grid is never empty");
    if alpha_eff <= 0.0 {
        return Err(HomogError::NonElliptic {
            index,
            value: alpha_eff,
        });
    }
    let c1 = a.samples.iter().copied().fold(f64::MIN, f64::max);
    Ok(CoefficientDiagnostics { alpha_eff, c1 })
}

/// Y x Z-periodic real potential sampled on the cell grid.
#[derive(Debug, Clone)]
pub struct PotentialField {
    field: CellField,
    dtau: Option<CellField>,
    spec: Option<PotentialSpec>,
}

impl PotentialField {
    pub fn from_spec(spec: &PotentialSpec, grid: PeriodicGrid) -> Self {
        Self {
            field: CellField::from_fn(grid, |y, tau| spec.eval(y, tau)),
            dtau: Some(CellField::from_fn(grid, |y, tau| spec.dtau(y, tau))),
            spec: Some(spec.clone()),
        }
    }

    pub fn from_samples(grid: PeriodicGrid, samples: Vec<f64>) -> Result<Self> {
        Ok(Self {
            field: CellField::new(grid, samples)?,
            dtau: None,
            spec: None,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.field.grid()
    }

    pub fn field(&self) -> &CellField {
        &self.field
    }

    pub fn spec(&self) -> Option<&PotentialSpec> {
        self.spec.as_ref()
    }

    /// `dV/dtau` samples: analytic when a descriptor is present, otherwise a
    /// central difference of the trigonometric interpolant.
    pub fn dtau(&self) -> CellField {
        if let Some(d) = &self.dtau {
            return d.clone();
        }
        let grid = *self.grid();
        let it = self.field.interpolant();
        let h = 1e-5;
        CellField::from_fn(grid, |y, tau| {
            (it.eval(y, tau + h) - it.eval(y, tau - h)) / (2.0 * h)
        })
    }

    pub fn check_zero_mean(&self) -> Result<()> {
        for k in 0..self.grid().k() {
            let mean = self.field.y_mean(k);
            if mean.abs() > ZERO_MEAN_TOLERANCE {
                return Err(HomogError::ZeroMeanViolated { slice: k, mean });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDiagnostics {
    pub epsilon: f64,
    /// `||V||_inf / eps`
    pub beta_eff: f64,
    /// `||dV/dtau||_inf / eps^2`
    pub c0_eff: f64,
    /// `beta_eff * T < 1`
    pub beta_t_below_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialDiagnostics {
    pub sup_norm: f64,
    pub dtau_sup_norm: f64,
    pub per_epsilon: Vec<EpsilonDiagnostics>,
}

/// Advisory size diagnostics for the scaled potential; only the zero-mean
/// hypothesis is enforced.
pub fn validate_potential(
    v: &PotentialField,
    epsilons: &[f64],
    horizon: f64,
) -> Result<PotentialDiagnostics> {
    if let Some(index) = v.field.samples().iter().position(|s| !s.is_finite()) {
        return Err(HomogError::NonFinite {
            field: "potential",
            index,
        });
    }
    v.check_zero_mean()?;
    let sup_norm = v.field.max_abs();
    let dtau_sup_norm = v.dtau().max_abs();
    let per_epsilon = epsilons
        .iter()
        .map(|&epsilon| {
            let beta_eff = sup_norm / epsilon;
            EpsilonDiagnostics {
                epsilon,
                beta_eff,
                c0_eff: dtau_sup_norm / (epsilon * epsilon),
                beta_t_below_one: beta_eff * horizon < 1.0,
            }
        })
        .collect();
    Ok(PotentialDiagnostics {
        sup_norm,
        dtau_sup_norm,
        per_epsilon,
    })
}

/// Stopping rule of the cell CG solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSolverOptions {
    pub tolerance: f64,
    /// Iteration cap is `max_iterations_per_m * M`.
    pub max_iterations_per_m: usize,
}

impl Default for CellSolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations_per_m: 10,
        }
    }
}

/// Solutions `chi^1 .. chi^d` of the diffusion cell problem.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    grid: PeriodicGrid,
    components: Vec<CellField>,
    /// Largest CG iteration count over the solves.
    pub iterations: usize,
}

impl CorrectorSet {
    pub fn new(components: Vec<CellField>) -> Result<Self> {
        let grid = *components
            .first()
            .ok_or_else(|| HomogError::InvalidProblem("corrector set needs components".into()))?
            .grid();
        if components.len() != grid.dim() || components.iter().any(|c| *c.grid() != grid) {
            return Err(HomogError::GridMismatch("corrector components disagree".into()));
        }
        Ok(Self {
            grid,
            components,
            iterations: 0,
        })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            components: vec![CellField::zeros(grid); grid.dim()],
            iterations: 0,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn component(&self, l: usize) -> &CellField {
        &self.components[l]
    }

    pub fn components(&self) -> &[CellField] {
        &self.components
    }
}

/// Solution `eta` of the potential cell problem.
#[derive(Debug, Clone)]
pub struct EtaField {
    field: CellField,
    pub iterations: usize,
}

impl EtaField {
    pub fn new(field: CellField) -> Self {
        Self { field, iterations: 0 }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::new(CellField::zeros(grid))
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.field.grid()
    }

    pub fn field(&self) -> &CellField {
        &self.field
    }
}

fn check_same_cell(a: &CoefficientField, grid: &PeriodicGrid) -> Result<()> {
    if a.grid.dim() != grid.dim() || a.grid.m() != grid.m() {
        return Err(HomogError::GridMismatch(format!(
            "coefficient on d={}, M={} but cell grid is d={}, M={}",
            a.grid.dim(),
            a.grid.m(),
            grid.dim(),
            grid.m()
        )));
    }
    Ok(())
}

fn solve_slice(
    ops: &SpectralOps,
    a: &[f64],
    a_mean: f64,
    rhs: &[f64],
    options: &CellSolverOptions,
) -> Result<(Vec<f64>, usize)> {
    let rhs = ops.project_range(rhs);
    let solution = pcg(
        |v| ops.apply_operator(a, v),
        |r| ops.inverse_laplacian(r, a_mean),
        &rhs,
        options.tolerance,
        options.max_iterations_per_m * ops.m(),
    )?;
    Ok((ops.project_range(&solution.x), solution.iterations))
}

pub fn solve_corrector(a: &CoefficientField, grid: &PeriodicGrid) -> Result<CorrectorSet> {
    solve_corrector_with(a, grid, &CellSolverOptions::default())
}

pub fn solve_corrector_with(
    a: &CoefficientField,
    grid: &PeriodicGrid,
    options: &CellSolverOptions,
) -> Result<CorrectorSet> {
    check_same_cell(a, grid)?;
    validate_coefficient(a)?;
    let ops = SpectralOps::new(grid.dim(), grid.m());
    let a_mean = a.mean();
    let solved: Vec<(Vec<f64>, usize)> = (0..grid.dim())
        .into_par_iter()
        .map(|l| {
            // a_hat(chi, v) = mean(a dv/dy_l)  <=>  L chi = D_l^T a = -D_l a
            let rhs: Vec<f64> = ops.derivative(&a.samples, l).iter().map(|v| -v).collect();
            solve_slice(&ops, &a.samples, a_mean, &rhs, options)
        })
        .collect::<Result<_>>()?;
    let iterations = solved.iter().map(|s| s.1).max().unwrap_or(0);
    // a does not depend on tau, so every slice carries the same solution
    let components = solved
        .into_iter()
        .map(|(slice, _)| CellField::from_slices(*grid, vec![slice; grid.k()]))
        .collect();
    Ok(CorrectorSet {
        grid: *grid,
        components,
        iterations,
    })
}

pub fn solve_eta(a: &CoefficientField, v: &PotentialField, grid: &PeriodicGrid) -> Result<EtaField> {
    solve_eta_with(a, v, grid, &CellSolverOptions::default())
}

pub fn solve_eta_with(
    a: &CoefficientField,
    v: &PotentialField,
    grid: &PeriodicGrid,
    options: &CellSolverOptions,
) -> Result<EtaField> {
    check_same_cell(a, grid)?;
    if v.grid() != grid {
        return Err(HomogError::GridMismatch(
            "potential grid differs from cell grid".into(),
        ));
    }
    validate_coefficient(a)?;
    v.check_zero_mean()?;
    let ops = SpectralOps::new(grid.dim(), grid.m());
    let a_mean = a.mean();
    // slices with bitwise-identical V share one solve
    let mut first_of: Vec<usize> = Vec::with_capacity(grid.k());
    for k in 0..grid.k() {
        let slice = v.field.slice(k);
        let first = (0..k)
            .find(|&j| first_of[j] == j && v.field.slice(j) == slice)
            .unwrap_or(k);
        first_of.push(first);
    }
    let unique: Vec<usize> = (0..grid.k()).filter(|&k| first_of[k] == k).collect();
    let solved: Vec<(Vec<f64>, usize)> = unique
        .par_iter()
        .map(|&k| solve_slice(&ops, &a.samples, a_mean, v.field.slice(k), options))
        .collect::<Result<_>>()?;
    let iterations = solved.iter().map(|s| s.1).max().unwrap_or(0);
    let slices = first_of
        .iter()
        .map(|&k| {
            let pos = unique.binary_search(&k).expect("unique slice");
            solved[pos].0.clone()
        })
        .collect();
    Ok(EtaField {
        field: CellField::from_slices(*grid, slices),
        iterations,
    })
}

/// Which cell equation a residual refers to.
#[derive(Debug, Clone, Copy)]
pub enum CellProblem<'a> {
    Corrector { axis: usize },
    Eta { potential: &'a PotentialField },
}

/// Discrete `H^{-1}` (dual) norm of the cell-equation residual, RMS over tau
/// slices.
pub fn cell_residual(a: &CoefficientField, problem: CellProblem<'_>, field: &CellField) -> Result<f64> {
    let grid = field.grid();
    check_same_cell(a, grid)?;
    let ops = SpectralOps::new(grid.dim(), grid.m());
    let corrector_rhs = match problem {
        CellProblem::Corrector { axis } => {
            if axis >= grid.dim() {
                return Err(HomogError::InvalidProblem(format!("axis {axis} out of range")));
            }
            Some(
                ops.derivative(&a.samples, axis)
                    .iter()
                    .map(|v| -v)
                    .collect::<Vec<_>>(),
            )
        }
        CellProblem::Eta { potential } => {
            if potential.grid() != grid {
                return Err(HomogError::GridMismatch(
                    "potential grid differs from field grid".into(),
                ));
            }
            None
        }
    };
    let n = grid.slice_len() as f64;
    let mut total = 0.0;
    for k in 0..grid.k() {
        let rhs = match (&corrector_rhs, problem) {
            (Some(r), _) => ops.project_range(r),
            (None, CellProblem::Eta { potential }) => ops.project_range(potential.field.slice(k)),
            _ => unreachable!(),
        };
        let applied = ops.apply_operator(&a.samples, field.slice(k));
        let r: Vec<f64> = rhs.iter().zip(&applied).map(|(b, l)| b - l).collect();
        let z = ops.inverse_laplacian(&r, 1.0);
        total += r.iter().zip(&z).map(|(r, z)| r * z).sum::<f64>() / n;
    }
    Ok((total / grid.k() as f64).max(0.0).sqrt())
}

/// Discrete cell form `a_hat(w, v) = mean_{Y x Z}(a grad w . grad v)` for real fields.
pub fn cell_energy(a: &CoefficientField, w: &CellField, v: &CellField) -> Result<f64> {
    let grid = w.grid();
    check_same_cell(a, grid)?;
    if v.grid() != grid {
        return Err(HomogError::GridMismatch("cell_energy fields differ".into()));
    }
    let ops = SpectralOps::new(grid.dim(), grid.m());
    let mut total = 0.0;
    for k in 0..grid.k() {
        let gw = ops.gradient(w.slice(k));
        let gv = ops.gradient(v.slice(k));
        for (dw, dv) in gw.iter().zip(&gv) {
            total += dw
                .iter()
                .zip(dv)
                .zip(&a.samples)
                .map(|((x, y), a)| a * x * y)
                .sum::<f64>();
        }
    }
    Ok(total * grid.weight())
}

/// `mean_{Y x Z} |grad v|^2`
pub fn gradient_norm_sq(v: &CellField) -> f64 {
    let grid = v.grid();
    let ops = SpectralOps::new(grid.dim(), grid.m());
    (0..grid.k())
        .map(|k| {
            ops.gradient(v.slice(k))
                .iter()
                .flatten()
                .map(|g| g * g)
                .sum::<f64>()
        })
        .sum::<f64>()
        * grid.weight()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(dim: usize, m: usize, k: usize) -> PeriodicGrid {
        PeriodicGrid::new(dim, m, k).unwrap()
    }

    fn cosine_a(mean: f64, amp: f64) -> CoefficientSpec {
        CoefficientSpec::Cosine { mean, amplitude: amp }
    }

    #[test]
    fn coefficient_diagnostics() {
        let g = grid(1, 256, 1);
        let a = CoefficientField::from_spec(&CoefficientSpec::Constant { value: 1.0 }, g);
        let d = validate_coefficient(&a).unwrap();
        assert_eq!((d.alpha_eff, d.c1), (1.0, 1.0));

        let a = CoefficientField::from_spec(&cosine_a(1.0, 0.5), g);
        let d = validate_coefficient(&a).unwrap();
        assert!((d.alpha_eff - 0.5).abs() < 1e-15);
        assert!((d.c1 - 1.5).abs() < 1e-15);

        let mut s = vec![1.0; 8];
        s[3] = -0.1;
        let a = CoefficientField::from_samples(grid(1, 8, 1), s).unwrap();
        assert!(matches!(
            validate_coefficient(&a),
            Err(HomogError::NonElliptic { index: 3, .. })
        ));
        let mut s = vec![1.0; 8];
        s[2] = f64::NAN;
        let a = CoefficientField::from_samples(grid(1, 8, 1), s).unwrap();
        assert!(matches!(
            validate_coefficient(&a),
            Err(HomogError::NonFinite { .. })
        ));
    }

    #[test]
    fn potential_diagnostics() {
        let g = grid(1, 64, 16);
        let zero = PotentialField::from_spec(&PotentialSpec::Zero, g);
        let d = validate_potential(&zero, &[0.5, 0.125], 0.5).unwrap();
        assert!(d
            .per_epsilon
            .iter()
            .all(|e| e.beta_eff == 0.0 && e.beta_t_below_one));

        let v = PotentialField::from_spec(&PotentialSpec::cosine_product(1.0, &[1], 1), g);
        let d = validate_potential(&v, &[0.125], 0.5).unwrap();
        assert!((d.per_epsilon[0].beta_eff - 8.0).abs() < 1e-12);
        assert!((d.dtau_sup_norm - 2.0 * PI).abs() < 1e-2);
        assert!(!d.per_epsilon[0].beta_t_below_one);

        let shifted = PotentialSpec::Modes {
            modes: vec![crate::descriptors::PotentialMode {
                amplitude: 1.0,
                wave: vec![1],
                phase: 0.0,
                tau_wave: 0,
                tau_phase: 0.0,
            }],
            offset: 0.3,
        };
        let v = PotentialField::from_spec(&shifted, g);
        assert!(matches!(
            validate_potential(&v, &[0.1], 1.0),
            Err(HomogError::ZeroMeanViolated { .. })
        ));
    }

    #[test]
    fn constant_coefficient_has_zero_corrector() {
        let g = grid(2, 8, 3);
        let a = CoefficientField::from_spec(&CoefficientSpec::Constant { value: 2.5 }, g);
        let chi = solve_corrector(&a, &g).unwrap();
        for c in chi.components() {
            assert!(c.max_abs() < 1e-14);
        }
    }

    #[test]
    fn one_dimensional_flux_is_constant() {
        let g = grid(1, 256, 2);
        let a = CoefficientField::from_spec(&cosine_a(1.0, 0.5), g);
        let chi = solve_corrector(&a, &g).unwrap();
        let dchi = chi.component(0).derivative(0);
        let q_star = 3f64.sqrt() / 2.0;
        for (p, a) in a.samples().iter().enumerate() {
            assert!((a * (1.0 - dchi.samples()[p]) - q_star).abs() < 1e-10);
        }
        assert!(chi.component(0).max_abs_y_mean() <= ZERO_MEAN_TOLERANCE);
        let r = cell_residual(&a, CellProblem::Corrector { axis: 0 }, chi.component(0)).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn eta_for_trigonometric_potential() {
        let g = grid(1, 8, 8);
        let a = CoefficientField::from_spec(&CoefficientSpec::Constant { value: 1.0 }, g);
        let v = PotentialField::from_spec(&PotentialSpec::cosine_product(1.0, &[1], 1), g);
        let eta = solve_eta(&a, &v, &g).unwrap();
        let exact = CellField::from_fn(g, |y, t| {
            (2.0 * PI * y[0]).cos() * (2.0 * PI * t).cos() / (4.0 * PI * PI)
        });
        for (e, x) in eta.field().samples().iter().zip(exact.samples()) {
            assert!((e - x).abs() < 1e-10);
        }
        let r = cell_residual(&a, CellProblem::Eta { potential: &v }, &exact).unwrap();
        assert!(r < 1e-10);

        let a2 = CoefficientField::from_spec(&CoefficientSpec::Constant { value: 2.0 }, g);
        let sine = PotentialSpec::Modes {
            modes: vec![crate::descriptors::PotentialMode {
                amplitude: 1.0,
                wave: vec![1],
                phase: -PI / 2.0,
                tau_wave: 0,
                tau_phase: 0.0,
            }],
            offset: 0.0,
        };
        let v = PotentialField::from_spec(&sine, g);
        let eta = solve_eta(&a2, &v, &g).unwrap();
        let exact = CellField::from_fn(g, |y, _| (2.0 * PI * y[0]).sin() / (8.0 * PI * PI));
        for (e, x) in eta.field().samples().iter().zip(exact.samples()) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_potential_gives_zero_eta() {
        let g = grid(2, 8, 2);
        let a = CoefficientField::from_spec(&cosine_a(1.0, 0.3), g);
        let v = PotentialField::from_spec(&PotentialSpec::Zero, g);
        assert_eq!(solve_eta(&a, &v, &g).unwrap().field().max_abs(), 0.0);
    }

    #[test]
    fn residual_detects_perturbation() {
        let g = grid(1, 32, 1);
        let a = CoefficientField::from_spec(&CoefficientSpec::Constant { value: 1.0 }, g);
        let zero = CellField::zeros(g);
        assert_eq!(
            cell_residual(&a, CellProblem::Corrector { axis: 0 }, &zero).unwrap(),
            0.0
        );
        let perturbed = CellField::from_fn(g, |y, _| 0.1 * (2.0 * PI * y[0]).cos());
        let r = cell_residual(&a, CellProblem::Corrector { axis: 0 }, &perturbed).unwrap();
        // 0.1 * 2 pi / sqrt 2 from the quadratic form
        assert!((r - 0.1 * 2.0 * PI / 2f64.sqrt()).abs() < 1e-12);
        assert!(r > 0.01);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = CoefficientField::from_spec(&cosine_a(1.0, 0.5), grid(1, 16, 1));
        assert!(matches!(
            solve_corrector(&a, &grid(1, 32, 1)),
            Err(HomogError::GridMismatch(_))
        ));
        let g = grid(1, 16, 2);
        let v = PotentialField::from_spec(&PotentialSpec::Zero, grid(1, 16, 4));
        let a = CoefficientField::from_spec(&cosine_a(1.0, 0.5), g);
        assert!(matches!(
            cell_residual(&a, CellProblem::Eta { potential: &v }, &CellField::zeros(g)),
            Err(HomogError::GridMismatch(_))
        ));
    }
}
