use num_complex::Complex64;
use proptest::prelude::*;

use homog_core::cell::{solve_corrector, CellSolverOptions, CoefficientField, PotentialField};
use homog_core::descriptors::{CoefficientSpec, InitialSpec, PotentialMode, PotentialSpec, SourceSpec};
use homog_core::effective::{assemble_model, effective_tensor};
use homog_core::fine::{solve_fine, FineProblem, ResolutionRule};
use homog_core::harness::pipeline::EpsilonRow;
use homog_core::harness::report::{parse_report_csv, report_csv};
use homog_core::io::{wave_field_bytes, wave_field_from_bytes};
use homog_core::twoscale::{
    first_order_field, reconstruct_u1, space_time_l2_error, two_scale_pairing, TestFunction, TrigPolynomial,
};
use homog_core::wave::{relative_mass_drift, SpaceTimeGrid, WaveField};
use homog_core::PeriodicGrid;

fn grid() -> SpaceTimeGrid {
    SpaceTimeGrid::new(1, 15, 6, 0.5).unwrap()
}

/// Smooth field vanishing on the boundary, driven by three coefficients.
fn field(c: [f64; 3]) -> WaveField {
    WaveField::from_fn(grid(), |x, t| {
        let s = (std::f64::consts::PI * x[0]).sin();
        Complex64::new(c[0] * s + c[1] * s * s * t, c[2] * s * x[0])
    })
}

fn coeffs() -> impl Strategy<Value = [f64; 3]> {
    [-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64]
}

fn potential(amplitudes: &[f64], phases: &[f64]) -> PotentialSpec {
    PotentialSpec::Modes {
        modes: amplitudes
            .iter()
            .zip(phases)
            .enumerate()
            .map(|(i, (&amplitude, &phase))| PotentialMode {
                amplitude,
                wave: vec![i as i32 + 1],
                phase,
                tau_wave: 1,
                tau_phase: 0.3 * i as f64,
            })
            .collect(),
        offset: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l2_error_is_a_metric(a in coeffs(), b in coeffs(), c in coeffs()) {
        let (u, v, w) = (field(a), field(b), field(c));
        let uv = space_time_l2_error(&u, &v).unwrap();
        prop_assert_eq!(space_time_l2_error(&u, &u).unwrap(), 0.0);
        prop_assert!((uv - space_time_l2_error(&v, &u).unwrap()).abs() <= 1e-14 * (1.0 + uv));
        let uw = space_time_l2_error(&u, &w).unwrap();
        let wv = space_time_l2_error(&w, &v).unwrap();
        prop_assert!(uv <= uw + wv + 1e-12);
    }

    #[test]
    fn first_order_field_is_linear_in_u0(a in coeffs(), b in coeffs(), s in -3.0..3.0f64) {
        let cg = PeriodicGrid::new(1, 16, 4).unwrap();
        let coef = CoefficientField::from_spec(&CoefficientSpec::Cosine { mean: 1.0, amplitude: 0.4 }, cg);
        let v = PotentialField::from_spec(&PotentialSpec::cosine_product(1.0, &[1], 1), cg);
        let sol = assemble_model(&coef, &v, &cg, &CellSolverOptions::default()).unwrap();
        let eps = 0.25;
        let first = |u: &WaveField| {
            first_order_field(&reconstruct_u1(u, &sol.correctors, &sol.eta).unwrap(), eps)
        };
        let (u, w) = (field(a), field(b));
        let combo = WaveField::new(
            grid(),
            u.data().iter().zip(w.data()).map(|(x, y)| x * s + y).collect(),
        )
        .unwrap();
        let lhs = first(&combo);
        let (fu, fw) = (first(&u), first(&w));
        let rhs = WaveField::new(
            grid(),
            fu.data().iter().zip(fw.data()).map(|(x, y)| x * s + y).collect(),
        )
        .unwrap();
        prop_assert!(space_time_l2_error(&lhs, &rhs).unwrap() < 1e-12 * (1.0 + lhs.max_abs()));
    }

    #[test]
    fn two_scale_pairing_is_linear(a in coeffs(), b in coeffs(), s in -3.0..3.0f64) {
        let psi = TestFunction::new(TrigPolynomial::cosine(&[1], 0.2), TrigPolynomial::cosine(&[1], 0.0));
        let (u, w) = (field(a), field(b));
        let combo = WaveField::new(
            grid(),
            u.data().iter().zip(w.data()).map(|(x, y)| x * s + y).collect(),
        )
        .unwrap();
        let lhs = two_scale_pairing(&combo, &psi, 0.125);
        let rhs = two_scale_pairing(&u, &psi, 0.125) * s + two_scale_pairing(&w, &psi, 0.125);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn shift_and_drift_scale_with_the_potential(
        amplitudes in proptest::collection::vec(-1.0..1.0f64, 1..3),
        phases in proptest::collection::vec(0.0..6.0f64, 3),
        s in -3.0..3.0f64,
    ) {
        let cg = PeriodicGrid::new(1, 32, 8).unwrap();
        let a = CoefficientField::from_spec(&CoefficientSpec::Cosine { mean: 1.0, amplitude: 0.5 }, cg);
        let spec = potential(&amplitudes, &phases);
        let opts = CellSolverOptions::default();
        let base = assemble_model(&a, &PotentialField::from_spec(&spec, cg), &cg, &opts).unwrap().model;
        let scaled = assemble_model(&a, &PotentialField::from_spec(&spec.scaled(s), cg), &cg, &opts)
            .unwrap()
            .model;
        prop_assert!(base.mu >= -1e-14);
        prop_assert!((scaled.mu - s * s * base.mu).abs() <= 1e-10 * (1.0 + base.mu.abs()));
        prop_assert!((scaled.b[0] - s * base.b[0]).abs() <= 1e-10);
        prop_assert_eq!(&scaled.q, &base.q);
    }

    #[test]
    fn tensor_lies_between_harmonic_and_arithmetic_means(
        mean in 1.0..3.0f64,
        ratio in 0.0..0.9f64,
        product in any::<bool>(),
    ) {
        let amplitude = mean * ratio;
        let spec = if product {
            CoefficientSpec::ProductOfCosines { mean, amplitude }
        } else {
            CoefficientSpec::Lamination { mean, amplitude, axis: 0 }
        };
        let grid = PeriodicGrid::new(2, 32, 1).unwrap();
        let a = CoefficientField::from_spec(&spec, grid);
        let q = effective_tensor(&a, &solve_corrector(&a, &grid).unwrap()).unwrap();
        let harmonic = a.harmonic_mean();
        for (i, row) in q.iter().enumerate() {
            prop_assert!(row[i] >= harmonic - 1e-10 && row[i] <= a.mean() + 1e-10);
            prop_assert_eq!(row[1 - i], q[1 - i][i]);
        }
    }

    #[test]
    fn fine_solve_is_unitary(
        amplitudes in proptest::collection::vec(-2.0..2.0f64, 1..3),
        phases in proptest::collection::vec(0.0..6.0f64, 3),
        eps in prop_oneof![Just(0.25), Just(0.125)],
        contrast in 0.0..0.8f64,
    ) {
        let p = FineProblem::resolved(
            1,
            eps,
            0.25,
            CoefficientSpec::Cosine { mean: 1.0, amplitude: contrast },
            potential(&amplitudes, &phases),
            SourceSpec::Zero,
            InitialSpec::Gaussian { center: vec![0.4], width: 0.1, amplitude: 1.0 },
            ResolutionRule { space_factor: 8.0, time_factor: 8.0 },
        )
        .unwrap();
        let u = solve_fine(&p).unwrap();
        prop_assert!(relative_mass_drift(&u) < 1e-11);
    }

    #[test]
    fn wave_field_bytes_round_trip(a in coeffs()) {
        let u = field(a);
        prop_assert_eq!(wave_field_from_bytes(&wave_field_bytes(&u)).unwrap(), u);
    }

    #[test]
    fn report_csv_round_trips(values in proptest::collection::vec(
        (1e-6..1.0f64, 1usize..5000, -1e300..1e300f64, any::<f64>().prop_filter("finite", |x| x.is_finite())),
        0..6,
    )) {
        let rows: Vec<EpsilonRow> = values
            .iter()
            .map(|&(eps, n, big, any)| EpsilonRow {
                epsilon: eps,
                n,
                steps: n + 1,
                error_zeroth: big,
                error_first: any,
                two_scale_residual: eps * 1e-200,
                corrector_residual: -any,
                limit_residual: 0.0,
                mass_drift: f64::MIN_POSITIVE,
                macro_mass_drift: f64::MAX,
                l2q: eps.sqrt(),
                l2h1: 1.0 / eps,
            })
            .collect();
        prop_assert_eq!(parse_report_csv(&report_csv(&rows)).unwrap(), rows);
    }
}
