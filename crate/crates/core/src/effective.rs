//! Homogenized coefficients assembled from the cell solutions by periodic
//! (trapezoid) quadrature.
//!
//! The macroscopic equation these feed is
//! `i du0/dt - sum q_ij d2u0/dx_i dx_j + b . grad u0 - mu u0 = f`, with
//!
//! * `q_ij = delta_ij mean(a) - mean(a dchi^j/dy_i)`
//! * `b_i  = mean(a deta/dy_i) - mean(chi^i V)`
//! * `mu   = mean(eta V)`
//!
//! where `u1 = -sum_j chi^j du0/dx_j - eta u0` is the first-order corrector.
//! Because the cell form is symmetric, `b` vanishes up to solver tolerance.

use serde::{Deserialize, Serialize};

use crate::cell::{
    solve_corrector_with, solve_eta_with, CellField, CellSolverOptions, CoefficientField, CorrectorSet,
    EtaField, PotentialField,
};
use crate::error::{HomogError, Result};
use crate::grid::PeriodicGrid;

/// Largest tolerated `max |q_ij - q_ji|` before symmetrization.
pub const ASYMMETRY_TOLERANCE: f64 = 1e-10;

/// Smallest tolerated value of `mu`.
pub const MU_FLOOR: f64 = -1e-12;

/// How an effective model was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub cell_m: usize,
    pub cell_k: usize,
    pub cg_tolerance: f64,
    pub max_iterations_per_m: usize,
    pub corrector_iterations: usize,
    pub eta_iterations: usize,
    /// `max |q_ij - q_ji|` before symmetrization.
    pub symmetry_defect: f64,
}

/// Constant coefficients of the homogenized equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModel {
    pub q: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub mu: f64,
    #[serde(default)]
    pub provenance: Provenance,
}

impl EffectiveModel {
    /// Free Schrödinger model: `q = I`, `b = 0`, `mu = 0`.
    pub fn identity(dim: usize) -> Self {
        let q = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            q,
            b: vec![0.0; dim],
            mu: 0.0,
            provenance: Provenance::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Smallest and largest eigenvalue of the symmetric part of `q` (d <= 2).
    pub fn eigen_range(&self) -> (f64, f64) {
        match self.dim() {
            1 => (self.q[0][0], self.q[0][0]),
            _ => {
                let (a, d) = (self.q[0][0], self.q[1][1]);
                let c = 0.5 * (self.q[0][1] + self.q[1][0]);
                let mid = 0.5 * (a + d);
                let rad = (0.25 * (a - d).powi(2) + c * c).sqrt();
                (mid - rad, mid + rad)
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let d = self.dim();
        if !(1..=2).contains(&d) || self.q.iter().any(|r| r.len() != d) || self.b.len() != d {
            return Err(HomogError::InvalidProblem(format!(
                "effective model shape is inconsistent (q {}x?, b {})",
                d,
                self.b.len()
            )));
        }
        let (lo, _) = self.eigen_range();
        if !(lo > 0.0) {
            return Err(HomogError::NotPositiveDefinite { min_eigenvalue: lo });
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("effective model always serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HomogError::Parse {
            path: "<model>".into(),
            message: e.to_string(),
        })
    }
}

fn check_grids(a: &CoefficientField, fields: &[&PeriodicGrid]) -> Result<PeriodicGrid> {
    let grid = *fields[0];
    if fields.iter().any(|g| **g != grid) || a.grid().dim() != grid.dim() || a.grid().m() != grid.m() {
        return Err(HomogError::GridMismatch(
            "effective coefficient inputs live on different grids".into(),
        ));
    }
    Ok(grid)
}

/// Mean over `Y x Z` of `a * f` for a field `f` on the cell grid.
fn weighted_mean(a: &CoefficientField, f: &CellField) -> f64 {
    let slice_len = f.grid().slice_len();
    f.samples()
        .iter()
        .enumerate()
        .map(|(i, v)| a.samples()[i % slice_len] * v)
        .sum::<f64>()
        * f.grid().weight()
}

fn product_mean(f: &CellField, g: &CellField) -> f64 {
    f.samples()
        .iter()
        .zip(g.samples())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * f.grid().weight()
}

/// `q` before symmetrization.
pub fn effective_tensor_raw(a: &CoefficientField, chi: &CorrectorSet) -> Result<Vec<Vec<f64>>> {
    check_grids(a, &[chi.grid()])?;
    let d = chi.grid().dim();
    let a_mean = a.mean();
    let mut q = vec![vec![0.0; d]; d];
    for j in 0..d {
        for (i, row) in q.iter_mut().enumerate() {
            let dchi = chi.component(j).derivative(i);
            row[j] = if i == j { a_mean } else { 0.0 } - weighted_mean(a, &dchi);
        }
    }
    Ok(q)
}

fn asymmetry(q: &[Vec<f64>]) -> f64 {
    let d = q.len();
    (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (q[i][j] - q[j][i]).abs())
        .fold(0.0, f64::max)
}

/// Effective diffusion tensor, symmetrized after checking the defect.
pub fn effective_tensor(a: &CoefficientField, chi: &CorrectorSet) -> Result<Vec<Vec<f64>>> {
    let q = effective_tensor_raw(a, chi)?;
    let defect = asymmetry(&q);
    if defect > ASYMMETRY_TOLERANCE {
        return Err(HomogError::AsymmetryExceeded {
            defect,
            tolerance: ASYMMETRY_TOLERANCE,
        });
    }
    let d = q.len();
    Ok((0..d)
        .map(|i| (0..d).map(|j| 0.5 * (q[i][j] + q[j][i])).collect())
        .collect())
}

/// Effective drift `b_i = mean(a deta/dy_i) - mean(chi^i V)`.
pub fn effective_drift(
    a: &CoefficientField,
    v: &PotentialField,
    chi: &CorrectorSet,
    eta: &EtaField,
) -> Result<Vec<f64>> {
    check_grids(a, &[chi.grid(), v.grid(), eta.grid()])?;
    Ok((0..chi.grid().dim())
        .map(|i| {
            let deta = eta.field().derivative(i);
            weighted_mean(a, &deta) - product_mean(chi.component(i), v.field())
        })
        .collect())
}

/// Effective potential shift `mu = mean(eta V)`.
pub fn effective_potential_shift(v: &PotentialField, eta: &EtaField) -> Result<f64> {
    if v.grid() != eta.grid() {
        return Err(HomogError::GridMismatch("potential and eta grids differ".into()));
    }
    let mu = product_mean(eta.field(), v.field());
    if mu < MU_FLOOR {
        return Err(HomogError::NegativeMu { mu });
    }
    Ok(mu)
}

/// Cell solutions together with the model built from them.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub correctors: CorrectorSet,
    pub eta: EtaField,
    pub model: EffectiveModel,
}

/// Solves both cell problems and assembles `q`, `b`, `mu` with provenance.
pub fn assemble_model(
    a: &CoefficientField,
    v: &PotentialField,
    grid: &PeriodicGrid,
    options: &CellSolverOptions,
) -> Result<CellSolution> {
    let correctors = solve_corrector_with(a, grid, options).map_err(|e| e.in_stage("solve_corrector"))?;
    let eta = solve_eta_with(a, v, grid, options).map_err(|e| e.in_stage("solve_eta"))?;
    let raw = effective_tensor_raw(a, &correctors)?;
    let q = effective_tensor(a, &correctors).map_err(|e| e.in_stage("effective_tensor"))?;
    let b = effective_drift(a, v, &correctors, &eta).map_err(|e| e.in_stage("effective_drift"))?;
    let mu = effective_potential_shift(v, &eta).map_err(|e| e.in_stage("effective_potential_shift"))?;
    let model = EffectiveModel {
        q,
        b,
        mu,
        provenance: Provenance {
            cell_m: grid.m(),
            cell_k: grid.k(),
            cg_tolerance: options.tolerance,
            max_iterations_per_m: options.max_iterations_per_m,
            corrector_iterations: correctors.iterations,
            eta_iterations: eta.iterations,
            symmetry_defect: asymmetry(&raw),
        },
    };
    Ok(CellSolution {
        correctors,
        eta,
        model,
    })
}
