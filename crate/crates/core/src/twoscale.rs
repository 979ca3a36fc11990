//! Two-scale diagnostics: oscillating pairings against separable test
//! functions, their limits, the first-order corrector, error norms and the
//! residual of the two-scale limit system.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::{CellField, CoefficientField, CorrectorSet, EtaField, PotentialField};
use crate::descriptors::SourceSpec;
use crate::error::{HomogError, Result};
use crate::grid::PeriodicGrid;
use crate::spectral::TrigInterpolant;
use crate::wave::{SpaceTimeGrid, WaveField};

/// Tolerance on `|mean_Y w|` for test functions required to be mean-zero.
pub const MEAN_ZERO_TOLERANCE: f64 = 1e-12;

/// One term `amplitude * cos(2 pi k.x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub wave: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

impl TrigTerm {
    fn arg(&self, x: &[f64]) -> f64 {
        2.0 * PI * self.wave.iter().zip(x).map(|(&k, &x)| k as f64 * x).sum::<f64>() + self.phase
    }
}

/// Real periodic trigonometric polynomial on the unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrigPolynomial {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            terms: vec![],
        }
    }

    /// `cos(2 pi k.x + phase)`
    pub fn cosine(wave: &[i32], phase: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![TrigTerm {
                amplitude: 1.0,
                wave: wave.to_vec(),
                phase,
            }],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|t| t.amplitude * t.arg(x).cos())
                .sum::<f64>()
    }

    pub fn derivative(&self, x: &[f64], axis: usize) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = t.wave.get(axis).copied().unwrap_or(0) as f64;
                -t.amplitude * 2.0 * PI * k * t.arg(x).sin()
            })
            .sum()
    }

    /// Exact mean over the unit cell.
    pub fn mean(&self) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|t| t.wave.iter().all(|&k| k == 0))
                .map(|t| t.amplitude * t.phase.cos())
                .sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.amplitude == 0.0 || t.wave.iter().all(|&k| k == 0))
    }
}

/// Slow factor `prod_i sin^p(k_i pi x_i) * sin^p(k_t pi t / T)`, vanishing to
/// order `p` on the boundary of `Q`. A zero mode number drops that factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowFactor {
    #[serde(default = "default_power")]
    pub power: u32,
    /// Per-axis mode numbers; missing entries default to 1.
    #[serde(default)]
    pub modes: Vec<u32>,
    #[serde(default = "default_mode")]
    pub time_mode: u32,
}

fn default_power() -> u32 {
    2
}

fn default_mode() -> u32 {
    1
}

impl Default for SlowFactor {
    fn default() -> Self {
        Self {
            power: 2,
            modes: vec![],
            time_mode: 1,
        }
    }
}

impl SlowFactor {
    fn mode(&self, axis: usize) -> f64 {
        self.modes.get(axis).copied().unwrap_or(1) as f64
    }

    fn factor(&self, k: f64, s: f64) -> f64 {
        if k == 0.0 {
            return 1.0;
        }
        (k * PI * s).sin().powi(self.power as i32)
    }

    fn factor_derivative(&self, k: f64, s: f64) -> f64 {
        let p = self.power as i32;
        if p == 0 || k == 0.0 {
            return 0.0;
        }
        p as f64 * (k * PI * s).sin().powi(p - 1) * (k * PI * s).cos() * k * PI
    }

    pub fn eval(&self, x: &[f64], t: f64, horizon: f64) -> f64 {
        let space: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &x)| self.factor(self.mode(i), x))
            .product();
        space * self.factor(self.time_mode as f64, t / horizon)
    }

    pub fn dx(&self, x: &[f64], t: f64, horizon: f64, axis: usize) -> f64 {
        let space: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if i == axis {
                    self.factor_derivative(self.mode(i), x)
                } else {
                    self.factor(self.mode(i), x)
                }
            })
            .product();
        space * self.factor(self.time_mode as f64, t / horizon)
    }

    pub fn dt(&self, x: &[f64], t: f64, horizon: f64) -> f64 {
        let space: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &x)| self.factor(self.mode(i), x))
            .product();
        space * self.factor_derivative(self.time_mode as f64, t / horizon) / horizon
    }
}

/// Separable test function `psi(x,t,y,tau) = phi(x,t) w(y) c(tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    #[serde(default)]
    pub slow: SlowFactor,
    pub y_factor: TrigPolynomial,
    pub tau_factor: TrigPolynomial,
}

impl TestFunction {
    pub fn new(y_factor: TrigPolynomial, tau_factor: TrigPolynomial) -> Self {
        Self {
            slow: SlowFactor::default(),
            y_factor,
            tau_factor,
        }
    }

    /// `w = 1`, `c = 1`: no fast variation.
    pub fn slow_only(slow: SlowFactor) -> Self {
        Self {
            slow,
            y_factor: TrigPolynomial::constant(1.0),
            tau_factor: TrigPolynomial::constant(1.0),
        }
    }

    pub fn fast(&self, y: &[f64], tau: f64) -> f64 {
        self.y_factor.eval(y) * self.tau_factor.eval(&[tau])
    }

    pub fn eval(&self, x: &[f64], t: f64, y: &[f64], tau: f64, horizon: f64) -> f64 {
        self.slow.eval(x, t, horizon) * self.fast(y, tau)
    }

    pub fn y_mean(&self) -> f64 {
        self.y_factor.mean()
    }

    pub fn check_mean_zero(&self) -> Result<()> {
        let mean = self.y_mean();
        if mean.abs() > MEAN_ZERO_TOLERANCE {
            return Err(HomogError::MeanZeroRequired { mean });
        }
        Ok(())
    }
}

/// Trapezoid quadrature weight of a node (space) on a Dirichlet grid.
fn space_weight(grid: &SpaceTimeGrid, node: usize) -> f64 {
    let last = grid.n + 1;
    let idx = grid.node_indices(node);
    idx[..grid.dim]
        .iter()
        .map(|&i| if i == 0 || i == last { 0.5 } else { 1.0 })
        .product::<f64>()
        * grid.cell_volume()
}

/// `sum_m sum_k w_m w_k g(m, k, x_k, t_m)`, summed in a fixed order.
fn quadrature(grid: &SpaceTimeGrid, g: impl Fn(usize, usize, &[f64], f64) -> Complex64) -> Complex64 {
    let d = grid.dim;
    let len = grid.level_len();
    let points: Vec<[f64; 2]> = (0..len).map(|k| grid.point(k)).collect();
    let weights: Vec<f64> = (0..len).map(|k| space_weight(grid, k)).collect();
    let mut total = Complex64::default();
    for m in 0..grid.levels() {
        let t = grid.time(m);
        let mut level = Complex64::default();
        for k in 0..len {
            if weights[k] != 0.0 {
                level += g(m, k, &points[k][..d], t) * weights[k];
            }
        }
        total += level * grid.time_weight(m);
    }
    total
}

/// `int_Q u(x,t) psi(x, t, x/eps, t/eps) dx dt` (no conjugation).
pub fn two_scale_pairing(u: &WaveField, psi: &TestFunction, epsilon: f64) -> Complex64 {
    let grid = *u.grid();
    let t_end = grid.horizon;
    let inv = 1.0 / epsilon;
    quadrature(&grid, |m, k, x, t| {
        let y = [x[0] * inv, x.get(1).map_or(0.0, |x| x * inv)];
        let value = psi.eval(x, t, &y[..grid.dim], t * inv, t_end);
        u.at(m, k) * value
    })
}

/// `(1/eps) int_Q u psi^eps`, defined for mean-zero `w`.
pub fn corrector_pairing(u: &WaveField, psi: &TestFunction, epsilon: f64) -> Result<Complex64> {
    psi.check_mean_zero()?;
    Ok(two_scale_pairing(u, psi, epsilon) / epsilon)
}

/// `int_Q du/dx_axis psi^eps` with the centered-difference gradient of `u`.
pub fn gradient_two_scale_pairing(u: &WaveField, psi: &TestFunction, epsilon: f64, axis: usize) -> Complex64 {
    let grid = *u.grid();
    let du = gradient_component(u, axis);
    let len = grid.level_len();
    let inv = 1.0 / epsilon;
    quadrature(&grid, |m, k, x, t| {
        let y = [x[0] * inv, x.get(1).map_or(0.0, |x| x * inv)];
        du[m * len + k] * psi.eval(x, t, &y[..grid.dim], t * inv, grid.horizon)
    })
}

/// Centered differences in the interior, one-sided second-order stencils on
/// the boundary; same layout as the field data.
pub fn gradient_component(u: &WaveField, axis: usize) -> Vec<Complex64> {
    let grid = u.grid();
    let p = grid.nodes_per_axis();
    let last = p - 1;
    let inv_2h = 0.5 / grid.h();
    let stride = if grid.dim == 1 || axis == 1 { 1 } else { p };
    let mut out = Vec::with_capacity(u.data().len());
    for m in 0..grid.levels() {
        let level = u.level(m);
        for k in 0..grid.level_len() {
            let i = grid.node_indices(k)[axis];
            let v = if i == 0 {
                -3.0 * level[k] + 4.0 * level[k + stride] - level[k + 2 * stride]
            } else if i == last {
                3.0 * level[k] - 4.0 * level[k - stride] + level[k - 2 * stride]
            } else {
                level[k + stride] - level[k - stride]
            };
            out.push(v * inv_2h);
        }
    }
    out
}

/// First-order corrector `u1 = -sum_j du0/dx_j chi^j(y,tau) - eta(y,tau) u0`
/// attached to a homogenized solution.
#[derive(Debug, Clone)]
pub struct CorrectorReconstruction {
    u0: WaveField,
    gradient: Vec<Vec<Complex64>>,
    correctors: CorrectorSet,
    eta: EtaField,
    chi_interp: Vec<TrigInterpolant>,
    eta_interp: TrigInterpolant,
}

pub fn reconstruct_u1(u0: &WaveField, chi: &CorrectorSet, eta: &EtaField) -> Result<CorrectorReconstruction> {
    let d = u0.grid().dim;
    if chi.grid() != eta.grid() {
        return Err(HomogError::GridMismatch(
            "corrector and eta cell grids differ".into(),
        ));
    }
    if chi.grid().dim() != d {
        return Err(HomogError::GridMismatch(format!(
            "cell grid has dimension {}, field has {d}",
            chi.grid().dim()
        )));
    }
    Ok(CorrectorReconstruction {
        u0: u0.clone(),
        gradient: (0..d).map(|j| gradient_component(u0, j)).collect(),
        correctors: chi.clone(),
        eta: eta.clone(),
        chi_interp: chi.components().iter().map(CellField::interpolant).collect(),
        eta_interp: eta.field().interpolant(),
    })
}

impl CorrectorReconstruction {
    pub fn u0(&self) -> &WaveField {
        &self.u0
    }

    pub fn gradient(&self, axis: usize) -> &[Complex64] {
        &self.gradient[axis]
    }

    pub fn correctors(&self) -> &CorrectorSet {
        &self.correctors
    }

    pub fn eta(&self) -> &EtaField {
        &self.eta
    }

    pub fn cell_grid(&self) -> &PeriodicGrid {
        self.correctors.grid()
    }

    /// `u1(x_k, t_m, y, tau)`.
    pub fn eval(&self, level: usize, node: usize, y: &[f64], tau: f64) -> Complex64 {
        let idx = level * self.u0.grid().level_len() + node;
        let mut v = -self.u0.data()[idx] * self.eta_interp.eval(y, tau);
        for (g, chi) in self.gradient.iter().zip(&self.chi_interp) {
            v -= g[idx] * chi.eval(y, tau);
        }
        v
    }
}

const TENSOR_CHUNK: usize = 1 << 22;

/// `u0 + eps u1(x, t, x/eps, t/eps)` on the grid of `u0`; boundary samples
/// carry the Dirichlet trace 0.
pub fn first_order_field(recon: &CorrectorReconstruction, epsilon: f64) -> WaveField {
    let grid = *recon.u0.grid();
    let len = grid.level_len();
    let inv = 1.0 / epsilon;
    let ys: Vec<[f64; 2]> = (0..len)
        .map(|k| {
            let x = grid.point(k);
            [x[0] * inv, x[1] * inv]
        })
        .collect();
    let chunk = (TENSOR_CHUNK / len).max(1);
    let mut data = recon.u0.data().to_vec();
    let mut start = 0;
    while start < grid.levels() {
        let end = (start + chunk).min(grid.levels());
        let taus: Vec<f64> = (start..end).map(|m| grid.time(m) * inv).collect();
        let eta = recon.eta_interp.eval_tensor(&ys, &taus);
        let chis: Vec<Vec<f64>> = recon
            .chi_interp
            .iter()
            .map(|c| c.eval_tensor(&ys, &taus))
            .collect();
        for (local, m) in (start..end).enumerate() {
            for k in 0..len {
                if grid.is_boundary(k) {
                    continue;
                }
                let idx = m * len + k;
                let t = local * len + k;
                let mut u1 = -recon.u0.data()[idx] * eta[t];
                for (g, chi) in recon.gradient.iter().zip(&chis) {
                    u1 -= g[idx] * chi[t];
                }
                data[idx] += u1 * epsilon;
            }
        }
        start = end;
    }
    WaveField::new(grid, data).expect("same grid as u0 with zero boundary")
}

/// Discrete `||u - v||_{L2(Q)}`.
pub fn space_time_l2_error(u: &WaveField, v: &WaveField) -> Result<f64> {
    u.check_matches(v)?;
    let grid = *u.grid();
    let len = grid.level_len();
    let vol = grid.cell_volume();
    let mut total = 0.0;
    for m in 0..grid.levels() {
        let offset = m * len;
        let s: f64 = (0..len)
            .map(|k| (u.data()[offset + k] - v.data()[offset + k]).norm_sqr())
            .sum();
        total += s * vol * grid.time_weight(m);
    }
    Ok(total.sqrt())
}

/// Mean over the cell grid of `g(slice, point, y, tau)`.
fn cell_mean(grid: &PeriodicGrid, g: impl Fn(usize, usize, &[f64], f64) -> f64) -> f64 {
    let d = grid.dim();
    let slice_len = grid.slice_len();
    let points: Vec<[f64; 2]> = (0..slice_len).map(|p| grid.y_point(p)).collect();
    let mut total = 0.0;
    for s in 0..grid.k() {
        let tau = grid.tau(s);
        for (p, y) in points.iter().enumerate() {
            total += g(s, p, &y[..d], tau);
        }
    }
    total * grid.weight()
}

/// `int_Q S(x,t) phi(x,t)` for a slow field laid out like a wave field.
fn slow_pairing(grid: &SpaceTimeGrid, field: &[Complex64], phi: impl Fn(&[f64], f64) -> f64) -> Complex64 {
    let len = grid.level_len();
    quadrature(grid, |m, k, x, t| field[m * len + k] * phi(x, t))
}

/// `int_{Q x Y x Z} g psi` for `g = u0` (when `u1` is `None`) or `g = u1`.
pub fn limit_pairing(
    u0: &WaveField,
    u1: Option<&CorrectorReconstruction>,
    psi: &TestFunction,
) -> Result<Complex64> {
    let grid = *u0.grid();
    let horizon = grid.horizon;
    let phi = |x: &[f64], t: f64| psi.slow.eval(x, t, horizon);
    match u1 {
        None => {
            let fast_mean = psi.y_factor.mean() * psi.tau_factor.mean();
            Ok(slow_pairing(&grid, u0.data(), phi) * fast_mean)
        }
        Some(recon) => {
            u0.check_matches(&recon.u0)?;
            let cg = *recon.cell_grid();
            let mut total = -slow_pairing(&grid, recon.u0.data(), phi)
                * cell_mean(&cg, |s, p, y, tau| {
                    recon.eta.field().samples()[s * cg.slice_len() + p] * psi.fast(y, tau)
                });
            for (j, chi) in recon.correctors.components().iter().enumerate() {
                total -= slow_pairing(&grid, &recon.gradient[j], phi)
                    * cell_mean(&cg, |s, p, y, tau| {
                        chi.samples()[s * cg.slice_len() + p] * psi.fast(y, tau)
                    });
            }
            Ok(total)
        }
    }
}

/// Limit of `int_Q du_eps/dx_axis psi^eps`:
/// `int (du0/dx_axis + du1/dy_axis) psi` over `Q x Y x Z`.
pub fn gradient_limit_pairing(recon: &CorrectorReconstruction, psi: &TestFunction, axis: usize) -> Complex64 {
    let grid = *recon.u0.grid();
    let horizon = grid.horizon;
    let cg = *recon.cell_grid();
    let sl = cg.slice_len();
    let phi = |x: &[f64], t: f64| psi.slow.eval(x, t, horizon);
    let mut total =
        slow_pairing(&grid, &recon.gradient[axis], phi) * psi.y_factor.mean() * psi.tau_factor.mean();
    let deta = recon.eta.field().derivative(axis);
    total -= slow_pairing(&grid, recon.u0.data(), phi)
        * cell_mean(&cg, |s, p, y, tau| deta.samples()[s * sl + p] * psi.fast(y, tau));
    for (j, chi) in recon.correctors.components().iter().enumerate() {
        let dchi = chi.derivative(axis);
        total -= slow_pairing(&grid, &recon.gradient[j], phi)
            * cell_mean(&cg, |s, p, y, tau| dchi.samples()[s * sl + p] * psi.fast(y, tau));
    }
    total
}

/// A test pair `(psi0, psi1)`: `psi0` depends on `(x,t)` only, `psi1` is a
/// separable test function with mean-zero `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPair {
    pub psi0: SlowFactor,
    pub psi0_scale: f64,
    pub psi1: TestFunction,
}

/// Per-pair residuals of the limit system and their largest modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitResidual {
    pub per_pair: Vec<Complex64>,
    pub max_modulus: f64,
}

/// Evaluates, for every pair,
/// `-i int u0 dpsi0/dt + int a (grad_x u0 + grad_y u1).(grad_x psi0 + grad_y psi1)
///  + int (u1 psi0 + u0 psi1) V - int f psi0`
/// with all integrals over `Q x Y x Z`.
pub fn limit_system_residual(
    recon: &CorrectorReconstruction,
    pairs: &[TestPair],
    a: &CoefficientField,
    v: &PotentialField,
    f: &SourceSpec,
) -> Result<LimitResidual> {
    let cg = *recon.cell_grid();
    if a.grid().dim() != cg.dim() || a.grid().m() != cg.m() || *v.grid() != cg {
        return Err(HomogError::GridMismatch(
            "coefficient or potential grid differs from the corrector grid".into(),
        ));
    }
    let grid = *recon.u0.grid();
    let d = grid.dim;
    let horizon = grid.horizon;
    let sl = cg.slice_len();
    let a_at = |p: usize| a.samples()[p];
    let u0 = recon.u0.data();
    let grads = &recon.gradient;
    let dchi: Vec<Vec<CellField>> = (0..d)
        .map(|i| {
            recon
                .correctors
                .components()
                .iter()
                .map(|c| c.derivative(i))
                .collect()
        })
        .collect();
    let deta: Vec<CellField> = (0..d).map(|i| recon.eta.field().derivative(i)).collect();
    let vs = v.field().samples();
    let eta = recon.eta.field().samples();
    let i_unit = Complex64::new(0.0, 1.0);

    // pair-independent cell means
    // q_ij = mean(a (delta_ij - d_i chi^j))
    let q: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    cell_mean(&cg, |s, p, _, _| {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        a_at(p) * (delta - dchi[i][j].samples()[s * sl + p])
                    })
                })
                .collect()
        })
        .collect();
    let a_deta: Vec<f64> = (0..d)
        .map(|i| cell_mean(&cg, |s, p, _, _| a_at(p) * deta[i].samples()[s * sl + p]))
        .collect();
    let chi_v: Vec<f64> = recon
        .correctors
        .components()
        .iter()
        .map(|c| cell_mean(&cg, |s, p, _, _| c.samples()[s * sl + p] * vs[s * sl + p]))
        .collect();
    let eta_v = cell_mean(&cg, |s, p, _, _| eta[s * sl + p] * vs[s * sl + p]);

    let mut per_pair = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let s0 = pair.psi0_scale;
        let phi0 = |x: &[f64], t: f64| s0 * pair.psi0.eval(x, t, horizon);
        let phi1 = |x: &[f64], t: f64| pair.psi1.slow.eval(x, t, horizon);
        let w1 = &pair.psi1;
        let fast_grad =
            |i: usize, y: &[f64], tau: f64| w1.y_factor.derivative(y, i) * w1.tau_factor.eval(&[tau]);

        let mut r = -i_unit * slow_pairing(&grid, u0, |x, t| s0 * pair.psi0.dt(x, t, horizon));
        for i in 0..d {
            let dphi0 = |x: &[f64], t: f64| s0 * pair.psi0.dx(x, t, horizon, i);
            for j in 0..d {
                r += slow_pairing(&grid, &grads[j], dphi0) * q[i][j];
                let m = cell_mean(&cg, |s, p, y, tau| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    a_at(p) * (delta - dchi[i][j].samples()[s * sl + p]) * fast_grad(i, y, tau)
                });
                r += slow_pairing(&grid, &grads[j], phi1) * m;
            }
            r -= slow_pairing(&grid, u0, dphi0) * a_deta[i];
            let m = cell_mean(&cg, |s, p, y, tau| {
                a_at(p) * deta[i].samples()[s * sl + p] * fast_grad(i, y, tau)
            });
            r -= slow_pairing(&grid, u0, phi1) * m;
        }
        let u0_phi0 = slow_pairing(&grid, u0, phi0);
        for (j, cv) in chi_v.iter().enumerate() {
            r -= slow_pairing(&grid, &grads[j], phi0) * *cv;
        }
        r -= u0_phi0 * eta_v;
        r += slow_pairing(&grid, u0, phi1) * cell_mean(&cg, |s, p, y, tau| vs[s * sl + p] * w1.fast(y, tau));
        if !f.is_zero() {
            r -= quadrature(&grid, |_, _, x, t| f.eval(x, t) * phi0(x, t));
        }
        per_pair.push(r);
    }
    let max_modulus = per_pair.iter().map(|r| r.norm()).fold(0.0, f64::max);
    Ok(LimitResidual {
        per_pair,
        max_modulus,
    })
}
