//! Named analytic builtins for the coefficient, potential, source and initial
//! state. They are what the config schema exposes, and they let the fine-scale
//! solver sample `a(x/eps)` and `V(x/eps, t/eps)` exactly at any point.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

/// Y-periodic scalar diffusion coefficient `a(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a = value`
    Constant { value: f64 },
    /// `a = mean + amplitude * (1/d) sum_i cos(2 pi y_i)`
    Cosine { mean: f64, amplitude: f64 },
    /// `a = mean + amplitude * cos(2 pi y_axis)`
    Lamination {
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `a = mean + amplitude * prod_i cos(2 pi y_i)`
    ProductOfCosines { mean: f64, amplitude: f64 },
}

impl CoefficientSpec {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match *self {
            CoefficientSpec::Constant { value } => value,
            CoefficientSpec::Cosine { mean, amplitude } => {
                let s: f64 = y.iter().map(|&y| (2.0 * PI * y).cos()).sum();
                mean + amplitude * s / y.len() as f64
            }
            CoefficientSpec::Lamination {
                mean,
                amplitude,
                axis,
            } => mean + amplitude * (2.0 * PI * y[axis]).cos(),
            CoefficientSpec::ProductOfCosines { mean, amplitude } => {
                mean + amplitude * y.iter().map(|&y| (2.0 * PI * y).cos()).product::<f64>()
            }
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if let CoefficientSpec::Lamination { axis, .. } = self {
            if *axis >= dim {
                return Err(HomogError::SchemaViolation {
                    key: "coefficient.axis".into(),
                    message: format!("axis {axis} out of range for dimension {dim}"),
                });
            }
        }
        Ok(())
    }
}

/// One term `amplitude * cos(2 pi k.y + phase) * cos(2 pi k_tau tau + tau_phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialMode {
    pub amplitude: f64,
    pub wave: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub tau_wave: i32,
    #[serde(default)]
    pub tau_phase: f64,
}

impl PotentialMode {
    fn spatial_arg(&self, y: &[f64]) -> f64 {
        2.0 * PI * self.wave.iter().zip(y).map(|(&k, &y)| k as f64 * y).sum::<f64>() + self.phase
    }

    fn tau_arg(&self, tau: f64) -> f64 {
        2.0 * PI * self.tau_wave as f64 * tau + self.tau_phase
    }
}

/// Y x Z-periodic real potential `V(y, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Modes {
        modes: Vec<PotentialMode>,
        #[serde(default)]
        offset: f64,
    },
}

impl PotentialSpec {
    /// `amplitude * prod cos(2 pi k_i y_i) * cos(2 pi k_tau tau)` written as a
    /// sum of plane-wave cosines.
    pub fn cosine_product(amplitude: f64, wave: &[i32], tau_wave: i32) -> Self {
        let mut modes = vec![PotentialMode {
            amplitude,
            wave: vec![],
            phase: 0.0,
            tau_wave,
            tau_phase: 0.0,
        }];
        for &k in wave {
            modes = modes
                .into_iter()
                .flat_map(|m| {
                    [1, -1].map(|s| {
                        let mut wave = m.wave.clone();
                        wave.push(s * k);
                        PotentialMode {
                            amplitude: m.amplitude * 0.5,
                            wave,
                            ..m.clone()
                        }
                    })
                })
                .collect();
        }
        if wave.len() == 1 {
            // cos(2 pi k y) directly, no need to split.
            return PotentialSpec::Modes {
                modes: vec![PotentialMode {
                    amplitude,
                    wave: wave.to_vec(),
                    phase: 0.0,
                    tau_wave,
                    tau_phase: 0.0,
                }],
                offset: 0.0,
            };
        }
        PotentialSpec::Modes { modes, offset: 0.0 }
    }

    pub fn eval(&self, y: &[f64], tau: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Modes { modes, offset } => {
                offset
                    + modes
                        .iter()
                        .map(|m| m.amplitude * m.spatial_arg(y).cos() * m.tau_arg(tau).cos())
                        .sum::<f64>()
            }
        }
    }

    /// `dV/dtau`
    pub fn dtau(&self, y: &[f64], tau: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Modes { modes, .. } => modes
                .iter()
                .map(|m| {
                    -m.amplitude
                        * 2.0
                        * PI
                        * m.tau_wave as f64
                        * m.spatial_arg(y).cos()
                        * m.tau_arg(tau).sin()
                })
                .sum(),
        }
    }

    pub fn is_tau_independent(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Modes { modes, .. } => modes.iter().all(|m| m.tau_wave == 0),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Modes { modes, offset } => {
                *offset == 0.0 && modes.iter().all(|m| m.amplitude == 0.0)
            }
        }
    }

    /// `s * V`
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            PotentialSpec::Zero => PotentialSpec::Zero,
            PotentialSpec::Modes { modes, offset } => PotentialSpec::Modes {
                modes: modes
                    .iter()
                    .map(|m| PotentialMode {
                        amplitude: s * m.amplitude,
                        ..m.clone()
                    })
                    .collect(),
                offset: s * offset,
            },
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if let PotentialSpec::Modes { modes, .. } = self {
            for (i, m) in modes.iter().enumerate() {
                if m.wave.len() > dim {
                    return Err(HomogError::SchemaViolation {
                        key: format!("potential.modes[{i}].wave"),
                        message: format!("{} components for dimension {dim}", m.wave.len()),
                    });
                }
            }
        }
        Ok(())
    }
}

fn sine_product(modes: &[u32], x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, &x)| (modes.get(i).copied().unwrap_or(1) as f64 * PI * x).sin())
        .product()
}

fn gaussian_bump(center: &[f64], width: f64, x: &[f64]) -> f64 {
    let r2: f64 = x
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - center.get(i).copied().unwrap_or(0.5)).powi(2))
        .sum();
    // boundary cutoff prod sin(pi x_i) makes the bump vanish on the boundary
    (-r2 / (2.0 * width * width)).exp() * sine_product(&[], x)
}

/// Source term `f(x, t)` on `Omega x (0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    #[default]
    Zero,
    /// `amplitude * exp(i frequency t) * prod sin(k_i pi x_i)`
    SineMode {
        modes: Vec<u32>,
        amplitude: f64,
        #[serde(default)]
        frequency: f64,
    },
    /// `amplitude * exp(i frequency t) * exp(-|x-c|^2 / 2w^2) * prod sin(pi x_i)`
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        #[serde(default)]
        frequency: f64,
    },
}

impl SourceSpec {
    pub fn eval(&self, x: &[f64], t: f64) -> Complex64 {
        match self {
            SourceSpec::Zero => Complex64::default(),
            SourceSpec::SineMode {
                modes,
                amplitude,
                frequency,
            } => Complex64::from_polar(amplitude * sine_product(modes, x), frequency * t),
            SourceSpec::Gaussian {
                center,
                width,
                amplitude,
                frequency,
            } => Complex64::from_polar(amplitude * gaussian_bump(center, *width, x), frequency * t),
        }
    }

    /// `exp(i omega t) * f`
    pub fn modulated(&self, omega: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            SourceSpec::Zero => {}
            SourceSpec::SineMode { frequency, .. } | SourceSpec::Gaussian { frequency, .. } => {
                *frequency += omega
            }
        }
        s
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceSpec::Zero => true,
            SourceSpec::SineMode { amplitude, .. } | SourceSpec::Gaussian { amplitude, .. } => {
                *amplitude == 0.0
            }
        }
    }
}

/// Initial state `u^0(x)`; every builtin vanishes on the boundary of `(0,1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    /// `amplitude * prod sin(k_i pi x_i)`
    SineMode {
        modes: Vec<u32>,
        amplitude: f64,
    },
    /// `amplitude * exp(-|x-c|^2 / 2w^2) * prod sin(pi x_i)`
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
    },
}

impl InitialSpec {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let v = match self {
            InitialSpec::Zero => 0.0,
            InitialSpec::SineMode { modes, amplitude } => amplitude * sine_product(modes, x),
            InitialSpec::Gaussian {
                center,
                width,
                amplitude,
            } => amplitude * gaussian_bump(center, *width, x),
        };
        Complex64::new(v, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_product_matches_direct_formula() {
        let v = PotentialSpec::cosine_product(1.5, &[1, 2], 1);
        let (y, tau) = ([0.13, -0.31], 0.22);
        let direct = 1.5 * (2.0 * PI * y[0]).cos() * (4.0 * PI * y[1]).cos() * (2.0 * PI * tau).cos();
        assert!((v.eval(&y, tau) - direct).abs() < 1e-14);
        let v1 = PotentialSpec::cosine_product(1.0, &[1], 1);
        assert!((v1.eval(&[0.1], 0.2) - (0.2 * PI).cos() * (0.4 * PI).cos()).abs() < 1e-15);
    }

    #[test]
    fn dtau_matches_finite_difference() {
        let v = PotentialSpec::cosine_product(0.7, &[1], 2);
        let (y, tau, h) = ([0.17], 0.11, 1e-6);
        let fd = (v.eval(&y, tau + h) - v.eval(&y, tau - h)) / (2.0 * h);
        assert!((v.dtau(&y, tau) - fd).abs() < 1e-7);
    }

    #[test]
    fn initial_states_vanish_on_boundary() {
        let g = InitialSpec::Gaussian {
            center: vec![0.5],
            width: 0.1,
            amplitude: 1.0,
        };
        assert!(g.eval(&[0.0]).norm() < 1e-15);
        assert!(g.eval(&[1.0]).norm() < 1e-15);
        let s = InitialSpec::SineMode {
            modes: vec![1, 2],
            amplitude: 1.0,
        };
        assert!(s.eval(&[0.3, 1.0]).norm() < 1e-15);
    }

    #[test]
    fn specs_parse_from_toml() {
        #[derive(Deserialize)]
        struct Wrap {
            a: CoefficientSpec,
            v: PotentialSpec,
        }
        let w: Wrap = toml::from_str(
            r#"
            a = { kind = "lamination", mean = 1.0, amplitude = 0.5, axis = 1 }
            v = { kind = "modes", modes = [{ amplitude = 1.0, wave = [1], tau_wave = 1 }] }
            "#,
        )
        .unwrap();
        assert_eq!(
            w.a,
            CoefficientSpec::Lamination {
                mean: 1.0,
                amplitude: 0.5,
                axis: 1
            }
        );
        assert!(!w.v.is_tau_independent());
    }
}
