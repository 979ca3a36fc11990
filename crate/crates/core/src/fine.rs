//! Fine-scale problem `i du/dt + A^eps u + (1/eps) V(x/eps, t/eps) u = f` on
//! `(0,1)^d` with homogeneous Dirichlet data, `A^eps = -div(a(x/eps) grad)`.

use serde::{Deserialize, Serialize};

use crate::descriptors::{CoefficientSpec, InitialSpec, PotentialSpec, SourceSpec};
use crate::error::{HomogError, Result};
use crate::linalg::SparseMatrix;
use crate::stepping::{crank_nicolson, Hamiltonian};
use crate::wave::{SpaceTimeGrid, WaveField};

/// Required resolution relative to `eps`: `h <= eps / space_factor` and
/// `dt <= eps / time_factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRule {
    pub space_factor: f64,
    pub time_factor: f64,
}

impl Default for ResolutionRule {
    fn default() -> Self {
        Self {
            space_factor: 16.0,
            time_factor: 16.0,
        }
    }
}

// Guards `ceil` against quotients such as 16 / (1/64) landing a hair above an
// integer.
const ROUNDING_SLACK: f64 = 1e-9;

impl ResolutionRule {
    /// Smallest `n` with `1/(n+1) <= eps / space_factor`.
    pub fn interior_points(&self, epsilon: f64) -> usize {
        ((self.space_factor / epsilon - ROUNDING_SLACK).ceil() as usize).max(2) - 1
    }

    /// Smallest step count with `T/steps <= eps / time_factor`.
    pub fn steps(&self, epsilon: f64, horizon: f64) -> usize {
        ((horizon * self.time_factor / epsilon - ROUNDING_SLACK).ceil() as usize).max(1)
    }

    pub fn grid(&self, dim: usize, epsilon: f64, horizon: f64) -> Result<SpaceTimeGrid> {
        Ok(SpaceTimeGrid::new(
            dim,
            self.interior_points(epsilon),
            self.steps(epsilon, horizon),
            horizon,
        )?
        .with_epsilon(epsilon))
    }

    pub fn check(&self, grid: &SpaceTimeGrid, epsilon: f64) -> Result<()> {
        let tol = 1.0 + 1e-12;
        let limit = epsilon / self.space_factor;
        if grid.h() > limit * tol {
            return Err(HomogError::MeshTooCoarse {
                h: grid.h(),
                factor: self.space_factor,
                limit,
            });
        }
        let limit = epsilon / self.time_factor;
        if grid.dt() > limit * tol {
            return Err(HomogError::TimeStepTooCoarse {
                dt: grid.dt(),
                factor: self.time_factor,
                limit,
            });
        }
        Ok(())
    }
}

/// Everything needed to integrate the fine-scale equation at one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineProblem {
    pub epsilon: f64,
    pub grid: SpaceTimeGrid,
    pub coefficient: CoefficientSpec,
    pub potential: PotentialSpec,
    pub source: SourceSpec,
    pub initial: InitialSpec,
    pub resolution: ResolutionRule,
}

impl FineProblem {
    /// Builds a problem on the coarsest grid satisfying `rule`.
    #[allow(clippy::too_many_arguments)]
    pub fn resolved(
        dim: usize,
        epsilon: f64,
        horizon: f64,
        coefficient: CoefficientSpec,
        potential: PotentialSpec,
        source: SourceSpec,
        initial: InitialSpec,
        rule: ResolutionRule,
    ) -> Result<Self> {
        let p = Self {
            epsilon,
            grid: rule.grid(dim, epsilon, horizon)?,
            coefficient,
            potential,
            source,
            initial,
            resolution: rule,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HomogError::InvalidProblem(format!(
                "eps must lie in (0,1), got {}",
                self.epsilon
            )));
        }
        self.coefficient.check_dim(self.grid.dim)?;
        self.potential.check_dim(self.grid.dim)?;
        self.resolution.check(&self.grid, self.epsilon)
    }
}

fn face_coefficient(p: &FineProblem, x: [f64; 2]) -> Result<f64> {
    let d = p.grid.dim;
    let y = [x[0] / p.epsilon, x[1] / p.epsilon];
    let a = p.coefficient.eval(&y[..d]);
    if !(a > 0.0) || !a.is_finite() {
        return Err(HomogError::NonElliptic { index: 0, value: a });
    }
    Ok(a)
}

/// Flux-form `-div(a(x/eps) grad)` on the interior unknowns, coefficients
/// sampled at cell faces.
pub fn assemble_stiffness(p: &FineProblem) -> Result<SparseMatrix> {
    let grid = &p.grid;
    let n = grid.n;
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let unknown = |i: usize, j: usize| match grid.dim {
        1 => i - 1,
        _ => (i - 1) * n + (j - 1),
    };
    let mut rows = Vec::with_capacity(grid.interior_len());
    for node in grid.interior_nodes() {
        let [i, j] = grid.node_indices(node);
        let mut row = Vec::with_capacity(1 + 2 * grid.dim);
        let mut diag = 0.0;
        for axis in 0..grid.dim {
            for side in [-1i64, 1] {
                let mut face = [i as f64 * h, j as f64 * h];
                let twice = 2 * [i, j][axis] as i64 + side;
                face[axis] = twice as f64 * 0.5 * h;
                let a = face_coefficient(p, face)? * inv_h2;
                diag += a;
                let mut nb = [i, j];
                nb[axis] = (nb[axis] as i64 + side) as usize;
                if nb[axis] >= 1 && nb[axis] <= n {
                    row.push((unknown(nb[0], nb[1]), -a));
                }
            }
        }
        row.push((unknown(i, j), diag));
        rows.push(row);
    }
    Ok(SparseMatrix::from_rows(rows))
}

/// `(1/eps) V(x/eps, t/eps)` at the interior nodes.
pub fn potential_diagonal(p: &FineProblem, t: f64) -> Vec<f64> {
    let d = p.grid.dim;
    let inv = 1.0 / p.epsilon;
    let tau = t * inv;
    p.grid
        .interior_nodes()
        .into_iter()
        .map(|k| {
            let x = p.grid.point(k);
            let y = [x[0] * inv, x[1] * inv];
            p.potential.eval(&y[..d], tau) * inv
        })
        .collect()
}

/// Discrete fine Hamiltonian at time `t`; real symmetric by construction.
pub fn assemble_hamiltonian(p: &FineProblem, t: f64) -> Result<SparseMatrix> {
    let k = assemble_stiffness(p)?;
    let v = potential_diagonal(p, t);
    let diag = SparseMatrix::from_rows(v.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect());
    Ok(k.add_scaled(&diag, 1.0))
}

/// Integrates the fine problem with midpoint-frozen Crank–Nicolson steps.
pub fn solve_fine(p: &FineProblem) -> Result<WaveField> {
    p.validate()?;
    let stiffness = assemble_stiffness(p)?;
    let hamiltonian = if p.potential.is_zero() {
        Hamiltonian {
            base: stiffness,
            diagonal: None,
        }
    } else if p.potential.is_tau_independent() {
        let v = potential_diagonal(p, 0.0);
        let diag = SparseMatrix::from_rows(v.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect());
        Hamiltonian {
            base: stiffness.add_scaled(&diag, 1.0),
            diagonal: None,
        }
    } else {
        Hamiltonian {
            base: stiffness,
            diagonal: Some(Box::new(move |t| potential_diagonal(p, t))),
        }
    };
    crank_nicolson(p.grid, &hamiltonian, &p.source, &p.initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::relative_mass_drift;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn standard(dim: usize, epsilon: f64) -> FineProblem {
        FineProblem::resolved(
            dim,
            epsilon,
            0.5,
            CoefficientSpec::Cosine {
                mean: 1.0,
                amplitude: 0.5,
            },
            PotentialSpec::cosine_product(1.0, &vec![1; dim], 1),
            SourceSpec::Zero,
            InitialSpec::Gaussian {
                center: vec![0.5; dim],
                width: 0.1,
                amplitude: 1.0,
            },
            ResolutionRule::default(),
        )
        .unwrap()
    }

    #[test]
    fn resolution_rule_counts() {
        let r = ResolutionRule::default();
        assert_eq!(r.interior_points(1.0 / 64.0), 1023);
        assert_eq!(r.steps(1.0 / 64.0, 0.5), 512);
        assert_eq!(r.interior_points(1.0 / 8.0), 127);
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        let mut p = standard(1, 1.0 / 8.0);
        p.grid = SpaceTimeGrid::new(1, 50, p.grid.steps, 0.5).unwrap();
        assert!(matches!(solve_fine(&p), Err(HomogError::MeshTooCoarse { .. })));
        let mut p = standard(1, 1.0 / 8.0);
        p.grid = SpaceTimeGrid::new(1, p.grid.n, 10, 0.5).unwrap();
        assert!(matches!(
            solve_fine(&p),
            Err(HomogError::TimeStepTooCoarse { .. })
        ));
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        for dim in [1, 2] {
            let mut p = standard(dim, 0.5);
            p.grid = SpaceTimeGrid::new(dim, 9, 10, 0.5).unwrap();
            p.resolution = ResolutionRule {
                space_factor: 1.0,
                time_factor: 1.0,
            };
            let h = assemble_hamiltonian(&p, 0.3).unwrap();
            assert!(h.is_symmetric());
            assert_eq!(h.n(), p.grid.interior_len());
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut p = standard(1, 1.0 / 8.0);
        p.initial = InitialSpec::Zero;
        let u = solve_fine(&p).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn free_case_matches_separation_of_variables() {
        let p = FineProblem {
            epsilon: 0.5,
            grid: SpaceTimeGrid::new(1, 255, 256, 0.5).unwrap(),
            coefficient: CoefficientSpec::Constant { value: 1.0 },
            potential: PotentialSpec::Zero,
            source: SourceSpec::Zero,
            initial: InitialSpec::SineMode {
                modes: vec![1],
                amplitude: 1.0,
            },
            resolution: ResolutionRule::default(),
        };
        let u = solve_fine(&p).unwrap();
        let g = u.grid();
        let exact = Complex64::from_polar(1.0, PI * PI * g.horizon);
        let err = (0..g.level_len())
            .map(|k| (u.at(g.steps, k) - exact * (PI * g.point(k)[0]).sin()).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn oscillatory_run_is_unitary() {
        let u = solve_fine(&standard(1, 1.0 / 8.0)).unwrap();
        assert!(relative_mass_drift(&u) < 1e-12);
    }

    #[test]
    fn two_dimensional_runs_are_unitary() {
        let mut p = standard(2, 0.25);
        p.grid = p.resolution.grid(2, 0.25, 0.125).unwrap();
        let u = solve_fine(&p).unwrap();
        assert!(relative_mass_drift(&u) < 1e-10);
        p.potential = PotentialSpec::cosine_product(1.0, &[1, 1], 0);
        let u = solve_fine(&p).unwrap();
        assert!(relative_mass_drift(&u) < 1e-10);
    }
}
