//! Macroscopic problem `i du0/dt + Q u0 + b . grad u0 - mu u0 = f` with
//! `Q = -sum q_ij d_i d_j`, constant coefficients, Dirichlet boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::descriptors::{InitialSpec, SourceSpec};
use crate::effective::EffectiveModel;
use crate::error::{HomogError, Result};
use crate::linalg::SparseMatrix;
use crate::stepping::{crank_nicolson, Hamiltonian};
use crate::wave::{SpaceTimeGrid, WaveField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroProblem {
    pub model: EffectiveModel,
    pub grid: SpaceTimeGrid,
    pub source: SourceSpec,
    pub initial: InitialSpec,
}

impl MacroProblem {
    pub fn validate(&self) -> Result<()> {
        self.model.check()?;
        if self.model.dim() != self.grid.dim {
            return Err(HomogError::GridMismatch(format!(
                "model has dimension {}, grid has {}",
                self.model.dim(),
                self.grid.dim
            )));
        }
        Ok(())
    }
}

fn unknown(grid: &SpaceTimeGrid, idx: [i64; 2]) -> Option<usize> {
    let n = grid.n as i64;
    let inside = |i: i64| (1..=n).contains(&i);
    match grid.dim {
        1 => inside(idx[0]).then(|| (idx[0] - 1) as usize),
        _ => (inside(idx[0]) && inside(idx[1])).then(|| ((idx[0] - 1) * n + idx[1] - 1) as usize),
    }
}

/// Second-order part `Q_h` (symmetric) and drift part `B_h` (antisymmetric)
/// on the interior unknowns.
pub fn assemble_macro_parts(model: &EffectiveModel, grid: &SpaceTimeGrid) -> (SparseMatrix, SparseMatrix) {
    let d = grid.dim;
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let mut second = Vec::with_capacity(grid.interior_len());
    let mut drift = Vec::with_capacity(grid.interior_len());
    for node in grid.interior_nodes() {
        let [i, j] = grid.node_indices(node);
        let here = [i as i64, j as i64];
        let me = unknown(grid, here).expect("interior node");
        let mut row = vec![(me, 0.0)];
        let mut brow = Vec::new();
        for axis in 0..d {
            let q = model.q[axis][axis] * inv_h2;
            row[0].1 += 2.0 * q;
            for side in [-1i64, 1] {
                let mut nb = here;
                nb[axis] += side;
                if let Some(k) = unknown(grid, nb) {
                    row.push((k, -q));
                    brow.push((k, side as f64 * model.b[axis] / (2.0 * h)));
                }
            }
        }
        if d == 2 {
            let q01 = 0.5 * (model.q[0][1] + model.q[1][0]);
            if q01 != 0.0 {
                // -2 q01 d0 d1 u with the centered four-point cross stencil
                let w = -2.0 * q01 * inv_h2 / 4.0;
                for (si, sj) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                    if let Some(k) = unknown(grid, [here[0] + si, here[1] + sj]) {
                        row.push((k, w * (si * sj) as f64));
                    }
                }
            }
        }
        second.push(row);
        drift.push(brow);
    }
    (SparseMatrix::from_rows(second), SparseMatrix::from_rows(drift))
}

/// Full macroscopic operator `Q_h + B_h - mu I`.
pub fn assemble_macro_operator(model: &EffectiveModel, grid: &SpaceTimeGrid) -> SparseMatrix {
    let (second, drift) = assemble_macro_parts(model, grid);
    let shift = SparseMatrix::from_rows((0..second.n()).map(|i| vec![(i, -model.mu)]).collect());
    second.add_scaled(&drift, 1.0).add_scaled(&shift, 1.0)
}

/// Integrates the macroscopic problem. The constant shift is applied exactly
/// through `u0 = exp(-i mu t) v`, where `v` solves the `mu = 0` problem with
/// source `exp(i mu t) f` by Crank–Nicolson.
pub fn solve_homogenized(p: &MacroProblem) -> Result<WaveField> {
    p.validate()?;
    let mu = p.model.mu;
    let unshifted = EffectiveModel {
        mu: 0.0,
        ..p.model.clone()
    };
    let hamiltonian = Hamiltonian {
        base: assemble_macro_operator(&unshifted, &p.grid),
        diagonal: None,
    };
    let mut u = crank_nicolson(p.grid, &hamiltonian, &p.source.modulated(mu), &p.initial)?;
    if mu != 0.0 {
        for m in 1..p.grid.levels() {
            let phase = Complex64::from_polar(1.0, -mu * p.grid.time(m));
            for v in u.level_mut(m) {
                *v *= phase;
            }
        }
    }
    Ok(u)
}

/// Eigen-range of `q` and norms of the Hermitian and skew parts of the
/// discrete macroscopic operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub q_min: f64,
    pub q_max: f64,
    /// Frobenius norm of the symmetric part.
    pub hermitian_norm: f64,
    /// Frobenius norm of the antisymmetric part.
    pub skew_norm: f64,
    /// `max |B_h + B_h^T|`; zero when the drift stencil is exactly antisymmetric.
    pub drift_antisymmetry_defect: f64,
}

pub fn operator_spectrum_check(model: &EffectiveModel, grid: &SpaceTimeGrid) -> SpectrumReport {
    let (q_min, q_max) = model.eigen_range();
    let g = assemble_macro_operator(model, grid);
    let gt = g.transpose();
    let sym = g.add_scaled(&gt, 1.0);
    let skew = g.add_scaled(&gt, -1.0);
    let (_, drift) = assemble_macro_parts(model, grid);
    let defect = drift.add_scaled(&drift.transpose(), 1.0);
    let defect = (0..defect.n())
        .flat_map(|i| defect.row(i).map(|(_, v)| v.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    SpectrumReport {
        q_min,
        q_max,
        hermitian_norm: 0.5 * sym.frobenius(),
        skew_norm: 0.5 * skew.frobenius(),
        drift_antisymmetry_defect: defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::relative_mass_drift;
    use std::f64::consts::PI;

    fn problem(model: EffectiveModel, n: usize, steps: usize) -> MacroProblem {
        let dim = model.dim();
        MacroProblem {
            model,
            grid: SpaceTimeGrid::new(dim, n, steps, 0.5).unwrap(),
            source: SourceSpec::Zero,
            initial: InitialSpec::Gaussian {
                center: vec![0.4; dim],
                width: 0.1,
                amplitude: 1.0,
            },
        }
    }

    #[test]
    fn free_case_matches_analytic_solution() {
        let mut p = problem(EffectiveModel::identity(1), 255, 256);
        p.initial = InitialSpec::SineMode {
            modes: vec![1],
            amplitude: 1.0,
        };
        let u = solve_homogenized(&p).unwrap();
        let g = u.grid();
        let exact = Complex64::from_polar(1.0, PI * PI * 0.5);
        let err = (0..g.level_len())
            .map(|k| (u.at(g.steps, k) - exact * (PI * g.point(k)[0]).sin()).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn mu_only_rotates_the_phase() {
        for dim in [1, 2] {
            let mut model = EffectiveModel::identity(dim);
            model.q[0][0] = 0.8;
            if dim == 2 {
                model.q[0][1] = 0.2;
                model.q[1][0] = 0.2;
            }
            let base = solve_homogenized(&problem(model.clone(), 15, 40)).unwrap();
            model.mu = 3.0;
            let shifted = solve_homogenized(&problem(model, 15, 40)).unwrap();
            let g = base.grid();
            for m in 0..g.levels() {
                let phase = Complex64::from_polar(1.0, -3.0 * g.time(m));
                for k in 0..g.level_len() {
                    assert!((shifted.at(m, k) - phase * base.at(m, k)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn hermitian_model_conserves_mass() {
        let mut model = EffectiveModel::identity(2);
        model.q = vec![vec![0.9, 0.1], vec![0.1, 1.1]];
        model.mu = 0.2;
        let u = solve_homogenized(&problem(model, 20, 50)).unwrap();
        assert!(relative_mass_drift(&u) < 1e-10);
    }

    #[test]
    fn drift_stencil_is_antisymmetric() {
        let mut model = EffectiveModel::identity(2);
        model.b = vec![0.3, -0.7];
        let g = SpaceTimeGrid::new(2, 6, 1, 1.0).unwrap();
        let r = operator_spectrum_check(&model, &g);
        assert_eq!(r.drift_antisymmetry_defect, 0.0);
        assert!(r.skew_norm > 0.0);
        let r = operator_spectrum_check(&EffectiveModel::identity(2), &g);
        assert_eq!(r.skew_norm, 0.0);
        assert_eq!((r.q_min, r.q_max), (1.0, 1.0));
    }

    #[test]
    fn spectrum_of_diagonal_tensor() {
        let mut model = EffectiveModel::identity(2);
        model.q[0][0] = 3f64.sqrt() / 2.0;
        let g = SpaceTimeGrid::new(2, 4, 1, 1.0).unwrap();
        let r = operator_spectrum_check(&model, &g);
        assert_eq!((r.q_min, r.q_max), (3f64.sqrt() / 2.0, 1.0));
    }

    #[test]
    fn indefinite_tensor_is_rejected() {
        let mut model = EffectiveModel::identity(2);
        model.q = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(matches!(
            solve_homogenized(&problem(model, 5, 5)),
            Err(HomogError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut p = problem(EffectiveModel::identity(1), 31, 10);
        p.initial = InitialSpec::Zero;
        assert_eq!(solve_homogenized(&p).unwrap().max_abs(), 0.0);
    }
}
