//! Crank–Nicolson propagation of `i du/dt + H(t) u = f` on the interior
//! unknowns of a Dirichlet grid, shared by the fine and homogenized solvers.

use num_complex::Complex64;

use crate::descriptors::{InitialSpec, SourceSpec};
use crate::error::{HomogError, Result};
use crate::linalg::{bicgstab, BandedLu, SparseMatrix, Tridiagonal};
use crate::wave::{SpaceTimeGrid, WaveField};

/// Relative residual target for iterative step solves.
pub const STEP_TOLERANCE: f64 = 1e-13;
const STEP_MAX_ITERATIONS: usize = 2000;

/// Diagonal part of `H(t)` that changes in time.
pub(crate) type TimeDiagonal<'a> = dyn Fn(f64) -> Vec<f64> + Sync + 'a;

/// `H(t) = base + diag(diagonal(t))` over the interior unknowns.
pub(crate) struct Hamiltonian<'a> {
    pub base: SparseMatrix,
    pub diagonal: Option<Box<TimeDiagonal<'a>>>,
}

enum Factored {
    Tri(Tridiagonal),
    Banded(BandedLu),
}

fn tridiagonal_system(base: &SparseMatrix, extra: Option<&[f64]>, c: Complex64) -> Result<Tridiagonal> {
    let n = base.n();
    let one = Complex64::new(1.0, 0.0);
    let mut lower = Vec::with_capacity(n.saturating_sub(1));
    let mut upper = Vec::with_capacity(n.saturating_sub(1));
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let d = base.get(i, i) + extra.map_or(0.0, |e| e[i]);
        diag.push(one - c * d);
        if i + 1 < n {
            upper.push(-c * base.get(i, i + 1));
            lower.push(-c * base.get(i + 1, i));
        }
    }
    Tridiagonal::factor(lower, diag, upper)
}

fn apply(base: &SparseMatrix, extra: Option<&[f64]>, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = base.matvec(x);
    if let Some(e) = extra {
        for ((y, x), e) in y.iter_mut().zip(x).zip(e) {
            *y += x * e;
        }
    }
    y
}

/// Runs the scheme
/// `(I - i dt/2 H) u^{m+1} = (I + i dt/2 H) u^m - i dt f(t_{m+1/2})`
/// with `H` frozen at the midpoint of each step.
pub(crate) fn crank_nicolson(
    grid: SpaceTimeGrid,
    hamiltonian: &Hamiltonian<'_>,
    source: &SourceSpec,
    initial: &InitialSpec,
) -> Result<WaveField> {
    let nodes = grid.interior_nodes();
    let points: Vec<[f64; 2]> = nodes.iter().map(|&k| grid.point(k)).collect();
    let d = grid.dim;
    let dt = grid.dt();
    let c = Complex64::new(0.0, 0.5 * dt);
    let base = &hamiltonian.base;
    if base.n() != nodes.len() {
        return Err(HomogError::GridMismatch(format!(
            "operator has {} rows for {} interior nodes",
            base.n(),
            nodes.len()
        )));
    }

    let mut field = WaveField::zeros(grid);
    let mut u: Vec<Complex64> = points.iter().map(|x| initial.eval(&x[..d])).collect();
    store(&mut field, 0, &nodes, &u);

    let fixed = match (&hamiltonian.diagonal, d) {
        (None, 1) => Some(Factored::Tri(tridiagonal_system(base, None, c)?)),
        (None, _) => Some(Factored::Banded(BandedLu::factor_shifted(
            base,
            Complex64::new(1.0, 0.0),
            -c,
        )?)),
        _ => None,
    };
    let has_source = !source.is_zero();

    for m in 0..grid.steps {
        let t = (m as f64 + 0.5) * dt;
        let extra = hamiltonian.diagonal.as_ref().map(|f| f(t));
        let hu = apply(base, extra.as_deref(), &u);
        let mut rhs: Vec<Complex64> = u.iter().zip(&hu).map(|(u, hu)| u + c * hu).collect();
        if has_source {
            let idt = Complex64::new(0.0, dt);
            for (r, x) in rhs.iter_mut().zip(&points) {
                *r -= idt * source.eval(&x[..d], t);
            }
        }
        u = match &fixed {
            Some(Factored::Tri(f)) => f.solve(&rhs),
            Some(Factored::Banded(f)) => f.solve(&rhs),
            None if d == 1 => tridiagonal_system(base, extra.as_deref(), c)?.solve(&rhs),
            None => {
                let e = extra.as_deref();
                let diag: Vec<Complex64> = (0..base.n())
                    .map(|i| Complex64::new(1.0, 0.0) - c * (base.get(i, i) + e.map_or(0.0, |e| e[i])))
                    .collect();
                let sol = bicgstab(
                    |x| {
                        let hx = apply(base, e, x);
                        x.iter().zip(&hx).map(|(x, hx)| x - c * hx).collect()
                    },
                    |r| r.iter().zip(&diag).map(|(r, d)| r / d).collect(),
                    &rhs,
                    u.clone(),
                    STEP_TOLERANCE,
                    STEP_MAX_ITERATIONS,
                )
                .map_err(|e| HomogError::LinearSolveFailed(format!("time step {m}: {e}")))?;
                sol.x
            }
        };
        if let Some(k) = u.iter().position(|v| !v.is_finite()) {
            return Err(HomogError::LinearSolveFailed(format!(
                "non-finite value at unknown {k} after step {m}"
            )));
        }
        store(&mut field, m + 1, &nodes, &u);
    }
    Ok(field)
}

fn store(field: &mut WaveField, level: usize, nodes: &[usize], u: &[Complex64]) {
    let dst = field.level_mut(level);
    for (&k, v) in nodes.iter().zip(u) {
        dst[k] = *v;
    }
}
