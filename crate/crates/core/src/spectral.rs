//! Fourier collocation on the periodic cell.
//!
//! Samples live on `y_m = -1/2 + m/M`; the discrete Fourier series is
//! `f(y) = (1/M) sum_k F_k exp(2 pi i k (y + 1/2))` with signed wavenumbers.
//! Differentiation zeroes the Nyquist mode so that the differentiation matrix is
//! real and antisymmetric, which keeps the cell operator `D^T a D` symmetric.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed wavenumber of FFT bin `j` on an `m`-point axis.
pub fn signed_wavenumber(j: usize, m: usize) -> i64 {
    if j <= m / 2 {
        j as i64
    } else {
        j as i64 - m as i64
    }
}

/// FFT plans and the differential operators of one periodic `M^d` slice.
#[derive(Clone)]
pub struct SpectralOps {
    dim: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps")
            .field("dim", &self.dim)
            .field("m", &self.m)
            .finish()
    }
}

impl SpectralOps {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let fft = if inverse { &self.inverse } else { &self.forward };
        let m = self.m;
        match self.dim {
            1 => fft.process(data),
            _ => {
                for row in data.chunks_exact_mut(m) {
                    fft.process(row);
                }
                let mut column = vec![Complex64::default(); m];
                for j in 0..m {
                    for i in 0..m {
                        column[i] = data[i * m + j];
                    }
                    fft.process(&mut column);
                    for i in 0..m {
                        data[i * m + j] = column[i];
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform of real samples.
    pub fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    /// Inverse transform (normalized), keeping the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spectrum, true);
        let scale = 1.0 / self.len() as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    /// Wavenumber of flat spectral index `p` along `axis`; 0 at Nyquist for
    /// differentiation purposes is handled by [`Self::diff_wavenumber`].
    pub fn wavenumber(&self, p: usize, axis: usize) -> i64 {
        let j = match (self.dim, axis) {
            (1, _) => p,
            (_, 0) => p / self.m,
            _ => p % self.m,
        };
        signed_wavenumber(j, self.m)
    }

    /// Wavenumber used by the spectral derivative: Nyquist maps to zero.
    pub fn diff_wavenumber(&self, p: usize, axis: usize) -> f64 {
        let k = self.wavenumber(p, axis);
        if k.unsigned_abs() as usize * 2 == self.m {
            0.0
        } else {
            k as f64
        }
    }

    /// True for modes annihilated by every derivative (constant and Nyquist
    /// combinations); these span the nullspace of the cell operator.
    pub fn is_null_mode(&self, p: usize) -> bool {
        (0..self.dim).all(|axis| self.diff_wavenumber(p, axis) == 0.0)
    }

    /// `sum_j |2 pi k_j|^2` with Nyquist zeroed.
    pub fn laplacian_symbol(&self, p: usize) -> f64 {
        (0..self.dim)
            .map(|axis| (2.0 * PI * self.diff_wavenumber(p, axis)).powi(2))
            .sum()
    }

    pub fn derivative(&self, samples: &[f64], axis: usize) -> Vec<f64> {
        let spectrum = self.forward(samples);
        self.derivative_from_spectrum(&spectrum, axis)
    }

    fn derivative_from_spectrum(&self, spectrum: &[Complex64], axis: usize) -> Vec<f64> {
        let scaled: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(p, &c)| c * Complex64::new(0.0, 2.0 * PI * self.diff_wavenumber(p, axis)))
            .collect();
        self.inverse_real(scaled)
    }

    pub fn gradient(&self, samples: &[f64]) -> Vec<Vec<f64>> {
        let spectrum = self.forward(samples);
        (0..self.dim)
            .map(|axis| self.derivative_from_spectrum(&spectrum, axis))
            .collect()
    }

    /// `-div(a grad v)` on one slice; `a` holds pointwise samples.
    pub fn apply_operator(&self, a: &[f64], v: &[f64]) -> Vec<f64> {
        let grad = self.gradient(v);
        let mut out = vec![0.0; v.len()];
        for (axis, g) in grad.into_iter().enumerate() {
            let flux: Vec<f64> = g.iter().zip(a).map(|(g, a)| g * a).collect();
            let div = self.derivative(&flux, axis);
            for (o, d) in out.iter_mut().zip(div) {
                *o -= d;
            }
        }
        out
    }

    /// Removes the nullspace modes of the cell operator.
    pub fn project_range(&self, samples: &[f64]) -> Vec<f64> {
        let mut spectrum = self.forward(samples);
        for (p, c) in spectrum.iter_mut().enumerate() {
            if self.is_null_mode(p) {
                *c = Complex64::default();
            }
        }
        self.inverse_real(spectrum)
    }

    /// Solves `scale * (-Laplace) u = r` on the range (nullspace modes set to 0).
    pub fn inverse_laplacian(&self, r: &[f64], scale: f64) -> Vec<f64> {
        let mut spectrum = self.forward(r);
        for (p, c) in spectrum.iter_mut().enumerate() {
            if self.is_null_mode(p) {
                *c = Complex64::default();
            } else {
                *c /= scale * self.laplacian_symbol(p);
            }
        }
        self.inverse_real(spectrum)
    }
}

/// One retained Fourier mode of a field on `Y x Z`.
#[derive(Debug, Clone, Copy)]
struct Mode {
    ky: [i64; 2],
    coefficient: Complex64,
}

/// Trigonometric interpolant of periodic samples on `Y x Z`, evaluated at
/// arbitrary `(y, tau)`.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    dim: usize,
    // Modes grouped by tau-wavenumber.
    groups: BTreeMap<i64, Vec<Mode>>,
}

impl TrigInterpolant {
    /// Builds the interpolant from samples laid out tau-slowest
    /// (`index = slice * M^d + p`). Coefficients below `cutoff * max|c|` are
    /// dropped.
    pub fn from_samples(dim: usize, m: usize, k: usize, samples: &[f64], cutoff: f64) -> Self {
        let ops = SpectralOps::new(dim, m);
        let slice_len = ops.len();
        let mut spectra: Vec<Vec<Complex64>> =
            samples.chunks_exact(slice_len).map(|s| ops.forward(s)).collect();
        let fft_tau = FftPlanner::new().plan_fft_forward(k);
        let mut column = vec![Complex64::default(); k];
        for p in 0..slice_len {
            for (t, spec) in spectra.iter().enumerate() {
                column[t] = spec[p];
            }
            fft_tau.process(&mut column);
            for (t, spec) in spectra.iter_mut().enumerate() {
                spec[p] = column[t];
            }
        }
        let norm = 1.0 / (slice_len * k) as f64;
        let largest = spectra.iter().flatten().map(|c| c.norm()).fold(0.0_f64, f64::max) * norm;
        let mut groups: BTreeMap<i64, Vec<Mode>> = BTreeMap::new();
        for (t, spec) in spectra.iter().enumerate() {
            let kt = signed_wavenumber(t, k);
            for (p, &c) in spec.iter().enumerate() {
                let c = c * norm;
                if largest == 0.0 || c.norm() <= cutoff * largest {
                    continue;
                }
                let ky = [
                    ops.wavenumber(p, 0),
                    if dim > 1 { ops.wavenumber(p, 1) } else { 0 },
                ];
                groups.entry(kt).or_default().push(Mode { ky, coefficient: c });
            }
        }
        Self { dim, groups }
    }

    pub fn mode_count(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    fn phase(k: i64, x: f64) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 * (x + 0.5))
    }

    pub fn eval(&self, y: &[f64], tau: f64) -> f64 {
        let mut acc = Complex64::default();
        for (&kt, modes) in &self.groups {
            let mut g = Complex64::default();
            for mode in modes {
                let mut e = Self::phase(mode.ky[0], y[0]);
                if self.dim > 1 {
                    e *= Self::phase(mode.ky[1], y[1]);
                }
                g += mode.coefficient * e;
            }
            acc += g * Self::phase(kt, tau);
        }
        acc.re
    }

    /// Evaluates on every pair of `points x taus`; result is indexed
    /// `[tau_index * points.len() + point_index]`.
    pub fn eval_tensor(&self, points: &[[f64; 2]], taus: &[f64]) -> Vec<f64> {
        let partial: Vec<(i64, Vec<Complex64>)> = self
            .groups
            .iter()
            .map(|(&kt, modes)| {
                let values = points
                    .iter()
                    .map(|y| {
                        modes
                            .iter()
                            .map(|mode| {
                                let mut e = Self::phase(mode.ky[0], y[0]);
                                if self.dim > 1 {
                                    e *= Self::phase(mode.ky[1], y[1]);
                                }
                                mode.coefficient * e
                            })
                            .sum::<Complex64>()
                    })
                    .collect();
                (kt, values)
            })
            .collect();
        let mut out = vec![0.0; points.len() * taus.len()];
        for (t, &tau) in taus.iter().enumerate() {
            let row = &mut out[t * points.len()..(t + 1) * points.len()];
            for (kt, values) in &partial {
                let e = Self::phase(*kt, tau);
                for (o, v) in row.iter_mut().zip(values) {
                    *o += (v * e).re;
                }
            }
        }
        out
    }
}
