//! Independent reference computations: dense Fourier–Galerkin solves of the
//! cell problems and closed-form laminate values.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};

use homog_core::cell::{solve_corrector, CellSolverOptions, CoefficientField, PotentialField};
use homog_core::descriptors::{CoefficientSpec, PotentialSpec};
use homog_core::effective::{assemble_model, effective_tensor};
use homog_core::PeriodicGrid;

type C = Complex<f64>;

/// Fourier coefficients of a trigonometric polynomial, keyed by wave vector.
type Spectrum = HashMap<[i32; 2], C>;

fn product_of_cosines_spectrum(mean: f64, amplitude: f64) -> Spectrum {
    let mut s = Spectrum::new();
    s.insert([0, 0], C::new(mean, 0.0));
    for k0 in [-1, 1] {
        for k1 in [-1, 1] {
            s.insert([k0, k1], C::new(amplitude / 4.0, 0.0));
        }
    }
    s
}

fn modes(n: i32, dim: usize) -> Vec<[i32; 2]> {
    let range: Vec<i32> = (-n..=n).collect();
    let mut out = Vec::new();
    for &k0 in &range {
        if dim == 1 {
            if k0 != 0 {
                out.push([k0, 0]);
            }
            continue;
        }
        for &k1 in &range {
            if (k0, k1) != (0, 0) {
                out.push([k0, k1]);
            }
        }
    }
    out
}

fn coefficient(a: &Spectrum, k: [i32; 2]) -> C {
    a.get(&k).copied().unwrap_or_default()
}

/// Effective tensor from the Galerkin solution of
/// `-div(a (grad w + e_j)) = 0` on the modes `|k_i| <= n`.
fn galerkin_tensor(a: &Spectrum, n: i32, dim: usize) -> Vec<Vec<f64>> {
    let basis = modes(n, dim);
    let two_pi = 2.0 * PI;
    let stiffness = DMatrix::from_fn(basis.len(), basis.len(), |r, c| {
        let (l, k) = (basis[r], basis[c]);
        let dot = (0..dim).map(|i| (k[i] * l[i]) as f64).sum::<f64>();
        coefficient(a, [l[0] - k[0], l[1] - k[1]]) * (two_pi * two_pi * dot)
    });
    let lu = stiffness.lu();
    let mut q = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let rhs = DVector::from_fn(basis.len(), |r, _| {
            let l = basis[r];
            C::new(0.0, two_pi * l[j] as f64) * coefficient(a, l)
        });
        let c = lu.solve(&rhs).expect("Galerkin matrix is regular");
        for (i, row) in q.iter_mut().enumerate() {
            let flux: C = basis
                .iter()
                .zip(c.iter())
                .map(|(k, ck)| ck * C::new(0.0, two_pi * k[i] as f64) * coefficient(a, [-k[0], -k[1]]))
                .sum();
            let delta = if i == j { coefficient(a, [0, 0]).re } else { 0.0 };
            row[j] = delta + flux.re;
        }
    }
    q
}

fn solver_tensor(spec: &CoefficientSpec, dim: usize, m: usize) -> Vec<Vec<f64>> {
    let grid = PeriodicGrid::new(dim, m, 1).unwrap();
    let a = CoefficientField::from_spec(spec, grid);
    let chi = solve_corrector(&a, &grid).unwrap();
    effective_tensor(&a, &chi).unwrap()
}

fn max_deviation(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    x.iter()
        .flatten()
        .zip(y.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[test]
fn product_coefficient_tensor_matches_dense_galerkin() {
    let spec = CoefficientSpec::ProductOfCosines {
        mean: 1.0,
        amplitude: 0.5,
    };
    let oracle = galerkin_tensor(&product_of_cosines_spectrum(1.0, 0.5), 7, 2);
    let ours = solver_tensor(&spec, 2, 16);
    let dev = max_deviation(&oracle, &ours);
    assert!(dev < 1e-6, "M = 16: {dev:e}");
    // both converge to the same tensor
    let fine_oracle = galerkin_tensor(&product_of_cosines_spectrum(1.0, 0.5), 12, 2);
    let fine_ours = solver_tensor(&spec, 2, 64);
    let dev = max_deviation(&fine_oracle, &fine_ours);
    assert!(dev < 1e-10, "converged: {dev:e}");
    assert!(fine_ours[0][1].abs() < 1e-12);
    assert!((fine_ours[0][0] - fine_ours[1][1]).abs() < 1e-12);
}

#[test]
fn one_dimensional_tensor_matches_dense_galerkin() {
    let mut a = Spectrum::new();
    a.insert([0, 0], C::new(1.0, 0.0));
    a.insert([1, 0], C::new(0.25, 0.0));
    a.insert([-1, 0], C::new(0.25, 0.0));
    let oracle = galerkin_tensor(&a, 40, 1)[0][0];
    let spec = CoefficientSpec::Cosine {
        mean: 1.0,
        amplitude: 0.5,
    };
    let ours = solver_tensor(&spec, 1, 128)[0][0];
    assert!((oracle - ours).abs() < 1e-12, "{oracle} {ours}");
    assert!((oracle - 3f64.sqrt() / 2.0).abs() < 1e-12);
}

#[test]
fn laminate_has_harmonic_and_arithmetic_means() {
    for axis in 0..2 {
        let spec = CoefficientSpec::Lamination {
            mean: 2.0,
            amplitude: 1.5,
            axis,
        };
        let q = solver_tensor(&spec, 2, 128);
        // harmonic mean of 2 + 1.5 cos is sqrt(2^2 - 1.5^2)
        let harmonic = (4.0f64 - 2.25).sqrt();
        assert!((q[axis][axis] - harmonic).abs() < 1e-10, "{q:?}");
        assert!((q[1 - axis][1 - axis] - 2.0).abs() < 1e-12, "{q:?}");
        assert!(q[0][1].abs() < 1e-12);
    }
}

/// `mu` for `V = cos(2 pi y) cos(2 pi tau)`: per slice the cell equation is
/// `-(a eta')' = cos(2 pi tau) cos(2 pi y)`, and the time mean of
/// `cos^2(2 pi tau)` is one half.
#[test]
fn potential_shift_matches_dense_galerkin() {
    let n = 40;
    let basis = modes(n, 1);
    let two_pi = 2.0 * PI;
    let a = |k: i32| match k {
        0 => 1.0,
        1 | -1 => 0.25,
        _ => 0.0,
    };
    let stiffness = DMatrix::from_fn(basis.len(), basis.len(), |r, c| {
        let (l, k) = (basis[r][0], basis[c][0]);
        C::new(a(l - k) * two_pi * two_pi * (k * l) as f64, 0.0)
    });
    let rhs = DVector::from_fn(basis.len(), |r, _| {
        C::new(if basis[r][0].abs() == 1 { 0.5 } else { 0.0 }, 0.0)
    });
    let eta = stiffness.lu().solve(&rhs).unwrap();
    // mean over y of eta * cos(2 pi y) picks the |k| = 1 coefficients
    let pairing: f64 = basis
        .iter()
        .zip(eta.iter())
        .filter(|(k, _)| k[0].abs() == 1)
        .map(|(_, c)| 0.5 * c.re)
        .sum();
    let oracle = 0.5 * pairing;

    let grid = PeriodicGrid::new(1, 128, 16).unwrap();
    let af = CoefficientField::from_spec(
        &CoefficientSpec::Cosine {
            mean: 1.0,
            amplitude: 0.5,
        },
        grid,
    );
    let v = PotentialField::from_spec(&PotentialSpec::cosine_product(1.0, &[1], 1), grid);
    let model = assemble_model(&af, &v, &grid, &CellSolverOptions::default())
        .unwrap()
        .model;
    assert!((model.mu - oracle).abs() < 1e-12, "{} {oracle}", model.mu);
    assert!(model.b[0].abs() < 1e-12);
}
