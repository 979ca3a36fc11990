//! Complex fields on the uniform space-time grid of `(0,1)^d x [0,T]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

/// Uniform grid with `n` interior nodes per axis (`h = 1/(n+1)`) and `steps`
/// time steps of size `T/steps`. Boundary nodes are stored too.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    pub dim: usize,
    pub n: usize,
    pub steps: usize,
    pub horizon: f64,
    /// Scale parameter of the run that produced the field, if any.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl SpaceTimeGrid {
    pub fn new(dim: usize, n: usize, steps: usize, horizon: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(HomogError::InvalidGrid(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if n == 0 || steps == 0 {
            return Err(HomogError::InvalidGrid(format!(
                "need at least one interior node and one step (n = {n}, steps = {steps})"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(HomogError::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            dim,
            n,
            steps,
            horizon,
            epsilon: None,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n + 2
    }

    /// Nodes per time level, boundary included.
    pub fn level_len(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn interior_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }

    /// Per-axis node indices of a flat node index (axis 0 slowest).
    pub fn node_indices(&self, node: usize) -> [usize; 2] {
        let p = self.nodes_per_axis();
        match self.dim {
            1 => [node, 0],
            _ => [node / p, node % p],
        }
    }

    pub fn node_index(&self, idx: [usize; 2]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.nodes_per_axis() + idx[1],
        }
    }

    pub fn point(&self, node: usize) -> [f64; 2] {
        let [i, j] = self.node_indices(node);
        [i as f64 * self.h(), j as f64 * self.h()]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let last = self.n + 1;
        let idx = self.node_indices(node);
        idx[..self.dim].iter().any(|&i| i == 0 || i == last)
    }

    /// Flat node indices of the interior nodes, in unknown order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.level_len()).filter(|&k| !self.is_boundary(k)).collect()
    }

    /// Same spatial and temporal layout; `epsilon` is ignored.
    pub fn matches(&self, other: &SpaceTimeGrid) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && self.steps == other.steps
            && self.horizon.to_bits() == other.horizon.to_bits()
    }

    /// Trapezoid weights in time.
    pub fn time_weight(&self, level: usize) -> f64 {
        if level == 0 || level == self.steps {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }
}

/// Complex samples on every node and time level; boundary samples are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: SpaceTimeGrid,
    data: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: SpaceTimeGrid, data: Vec<Complex64>) -> Result<Self> {
        let len = grid.level_len();
        if data.len() != len * grid.levels() {
            return Err(HomogError::GridMismatch(format!(
                "expected {} samples, got {}",
                len * grid.levels(),
                data.len()
            )));
        }
        for (k, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(HomogError::NonFinite {
                    field: "wave field",
                    index: k,
                });
            }
            if grid.is_boundary(k % len) && *v != Complex64::default() {
                return Err(HomogError::InvalidProblem(format!(
                    "boundary sample {} at level {} is nonzero",
                    k % len,
                    k / len
                )));
            }
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        Self {
            grid,
            data: vec![Complex64::default(); grid.level_len() * grid.levels()],
        }
    }

    /// Samples `f(x, t)` on the interior; boundary nodes are set to zero.
    pub fn from_fn(grid: SpaceTimeGrid, f: impl Fn(&[f64], f64) -> Complex64) -> Self {
        let mut u = Self::zeros(grid);
        let len = grid.level_len();
        for level in 0..grid.levels() {
            let t = grid.time(level);
            for node in 0..len {
                if !grid.is_boundary(node) {
                    let x = grid.point(node);
                    u.data[level * len + node] = f(&x[..grid.dim], t);
                }
            }
        }
        u
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn level(&self, m: usize) -> &[Complex64] {
        let len = self.grid.level_len();
        &self.data[m * len..(m + 1) * len]
    }

    pub(crate) fn level_mut(&mut self, m: usize) -> &mut [Complex64] {
        let len = self.grid.level_len();
        &mut self.data[m * len..(m + 1) * len]
    }

    pub fn at(&self, level: usize, node: usize) -> Complex64 {
        self.data[level * self.grid.level_len() + node]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Pointwise `self - other` on matching grids.
    pub fn difference(&self, other: &WaveField) -> Result<WaveField> {
        self.check_matches(other)?;
        Ok(WaveField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scaled(&self, s: Complex64) -> WaveField {
        WaveField {
            grid: self.grid,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub(crate) fn check_matches(&self, other: &WaveField) -> Result<()> {
        if !self.grid.matches(&other.grid) {
            return Err(HomogError::GridMismatch(format!(
                "space-time grids differ: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// `||u(., t_m)||^2_{L2}` for every time level.
pub fn mass_history(u: &WaveField) -> Vec<f64> {
    let vol = u.grid.cell_volume();
    (0..u.grid.levels())
        .map(|m| u.level(m).iter().map(|v| v.norm_sqr()).sum::<f64>() * vol)
        .collect()
}

/// Largest relative deviation of the mass from its initial value.
pub fn relative_mass_drift(u: &WaveField) -> f64 {
    let mass = mass_history(u);
    let m0 = mass[0];
    if m0 == 0.0 {
        return mass.iter().copied().fold(0.0, f64::max);
    }
    mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
}

/// Discrete `L2(Q)` and `L2(0,T; H1_0)` norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyNorms {
    pub l2q: f64,
    pub l2h1: f64,
}

/// `sum_faces |u_+ - u_-|^2 / h^2 * h^d` at one level.
fn dirichlet_energy(grid: &SpaceTimeGrid, level: &[Complex64]) -> f64 {
    let p = grid.nodes_per_axis();
    let h = grid.h();
    let mut sum = 0.0;
    match grid.dim {
        1 => {
            for i in 0..p - 1 {
                sum += (level[i + 1] - level[i]).norm_sqr();
            }
        }
        _ => {
            for i in 0..p {
                for j in 0..p {
                    let k = i * p + j;
                    if i + 1 < p {
                        sum += (level[k + p] - level[k]).norm_sqr();
                    }
                    if j + 1 < p {
                        sum += (level[k + 1] - level[k]).norm_sqr();
                    }
                }
            }
        }
    }
    sum / (h * h) * grid.cell_volume()
}

pub fn energy_norms(u: &WaveField) -> EnergyNorms {
    let grid = u.grid;
    let mass = mass_history(u);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for (m, mass) in mass.iter().enumerate() {
        let w = grid.time_weight(m);
        l2 += w * mass;
        h1 += w * dirichlet_energy(&grid, u.level(m));
    }
    EnergyNorms {
        l2q: l2.sqrt(),
        l2h1: h1.sqrt(),
    }
}
