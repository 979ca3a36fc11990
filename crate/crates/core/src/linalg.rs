//! Small linear-algebra kernels: CSR matrices, a complex Thomas solver, a
//! complex banded LU without pivoting, and the two Krylov iterations used by
//! the cell and time-stepping solvers.

use num_complex::Complex64;

use crate::error::{HomogError, Result};

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(c, v)| x[c] * v).sum())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        Self::from_rows(rows)
    }

    /// Entrywise `self + scale * other` over the union pattern.
    pub fn add_scaled(&self, other: &SparseMatrix, scale: f64) -> Self {
        let rows = (0..self.n)
            .map(|i| {
                self.row(i)
                    .chain(other.row(i).map(|(c, v)| (c, scale * v)))
                    .collect()
            })
            .collect();
        Self::from_rows(rows)
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.transpose() == *self
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(c, _)| c.abs_diff(i)))
            .max()
            .unwrap_or(0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }
}

/// Factorization of a tridiagonal complex matrix (Thomas algorithm).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<Complex64>,
    upper: Vec<Complex64>,
    // modified diagonal after elimination
    pivots: Vec<Complex64>,
}

impl Tridiagonal {
    /// `lower[i]` couples row `i+1` to column `i`; `upper[i]` couples row `i`
    /// to column `i+1`.
    pub fn factor(lower: Vec<Complex64>, diag: Vec<Complex64>, upper: Vec<Complex64>) -> Result<Self> {
        let n = diag.len();
        let mut pivots = Vec::with_capacity(n);
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i - 1] * upper[i - 1] / pivots[i - 1]
            };
            if !(p.norm() > f64::MIN_POSITIVE) || !p.is_finite() {
                return Err(HomogError::LinearSolveFailed(format!(
                    "zero pivot in tridiagonal elimination at row {i}"
                )));
            }
            pivots.push(p);
        }
        Ok(Self { lower, upper, pivots })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = rhs.len();
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let v = if i == 0 {
                rhs[0]
            } else {
                rhs[i] - self.lower[i - 1] / self.pivots[i - 1] * y[i - 1]
            };
            y.push(v);
        }
        let mut x = vec![Complex64::default(); n];
        for i in (0..n).rev() {
            let mut v = y[i];
            if i + 1 < n {
                v -= self.upper[i] * x[i + 1];
            }
            x[i] = v / self.pivots[i];
        }
        x
    }
}

/// Banded LU factorization (no pivoting) of a complex matrix with equal lower
/// and upper bandwidth.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    data: Vec<Complex64>,
}

impl BandedLu {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    /// Factors `diag_shift * I + scale * H` for a real sparse `H`.
    pub fn factor_shifted(h: &SparseMatrix, diag_shift: Complex64, scale: Complex64) -> Result<Self> {
        let n = h.n();
        let bw = h.bandwidth();
        let mut lu = Self {
            n,
            bw,
            data: vec![Complex64::default(); n * (2 * bw + 1)],
        };
        for i in 0..n {
            for (c, v) in h.row(i) {
                let k = lu.idx(i, c);
                lu.data[k] += scale * v;
            }
            let k = lu.idx(i, i);
            lu.data[k] += diag_shift;
        }
        for k in 0..n {
            let pivot = lu.data[lu.idx(k, k)];
            if !(pivot.norm() > 1e-300) || !pivot.is_finite() {
                return Err(HomogError::LinearSolveFailed(format!(
                    "zero pivot in banded LU at row {k}"
                )));
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let ik = lu.idx(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l == Complex64::default() {
                    continue;
                }
                for j in k + 1..end {
                    let kj = lu.data[lu.idx(k, j)];
                    let ij = lu.idx(i, j);
                    lu.data[ij] -= l * kj;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, bw) = (self.n, self.bw);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let start = i.saturating_sub(bw);
            let mut v = x[i];
            for (j, &xj) in x.iter().enumerate().take(i).skip(start) {
                v -= self.data[self.idx(i, j)] * xj;
            }
            x[i] = v;
        }
        for i in (0..n).rev() {
            let end = (i + bw + 1).min(n);
            let mut v = x[i];
            for (j, &xj) in x.iter().enumerate().take(end).skip(i + 1) {
                v -= self.data[self.idx(i, j)] * xj;
            }
            x[i] = v / self.data[self.idx(i, i)];
        }
        x
    }
}

/// Outcome of a Krylov solve.
#[derive(Debug, Clone)]
pub struct KrylovSolution<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Preconditioned conjugate gradient for a real symmetric positive
/// (semi)definite operator, started from zero.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<KrylovSolution<f64>> {
    let n = rhs.len();
    let rhs_norm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok(KrylovSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = rhs.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    for it in 1..=max_iterations {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(HomogError::SolverDiverged {
                what: "conjugate gradient",
                iterations: it,
                residual,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = dot(&r, &r).sqrt() / rhs_norm;
        if residual <= tolerance {
            return Ok(KrylovSolution {
                x,
                iterations: it,
                relative_residual: residual,
            });
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(HomogError::SolverDiverged {
        what: "conjugate gradient",
        iterations: max_iterations,
        residual,
    })
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(a, b)| a.conj() * b).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Right-preconditioned BiCGSTAB for a general complex operator.
pub fn bicgstab(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    precondition: impl Fn(&[Complex64]) -> Vec<Complex64>,
    rhs: &[Complex64],
    initial: Vec<Complex64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<KrylovSolution<Complex64>> {
    let n = rhs.len();
    let rhs_norm = cnorm(rhs);
    let mut x = initial;
    if rhs_norm == 0.0 {
        return Ok(KrylovSolution {
            x: vec![Complex64::default(); n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let ax = apply(&x);
    let mut r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut residual = cnorm(&r) / rhs_norm;
    if residual <= tolerance {
        return Ok(KrylovSolution {
            x,
            iterations: 0,
            relative_residual: residual,
        });
    }
    let r_hat = r.clone();
    let mut rho = Complex64::new(1.0, 0.0);
    let mut alpha = Complex64::new(1.0, 0.0);
    let mut omega = Complex64::new(1.0, 0.0);
    let mut v = vec![Complex64::default(); n];
    let mut p = vec![Complex64::default(); n];
    for it in 1..=max_iterations {
        let rho_new = cdot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precondition(&p);
        v = apply(&p_hat);
        alpha = rho / cdot(&r_hat, &v);
        let s: Vec<Complex64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if cnorm(&s) / rhs_norm <= tolerance {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(KrylovSolution {
                x,
                iterations: it,
                relative_residual: cnorm(&s) / rhs_norm,
            });
        }
        let s_hat = precondition(&s);
        let t = apply(&s_hat);
        let tt = cdot(&t, &t);
        omega = if tt.norm() == 0.0 {
            Complex64::default()
        } else {
            cdot(&t, &s) / tt
        };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = cnorm(&r) / rhs_norm;
        if residual <= tolerance {
            return Ok(KrylovSolution {
                x,
                iterations: it,
                relative_residual: residual,
            });
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    Err(HomogError::SolverDiverged {
        what: "BiCGSTAB",
        iterations: max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn laplacian_1d(n: usize) -> SparseMatrix {
        SparseMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let mut row = vec![(i, 2.0)];
                    if i > 0 {
                        row.push((i - 1, -1.0));
                    }
                    if i + 1 < n {
                        row.push((i + 1, -1.0));
                    }
                    row
                })
                .collect(),
        )
    }

    #[test]
    fn thomas_matches_banded_lu() {
        let n = 9;
        let h = laplacian_1d(n);
        let shift = c(1.0, 0.0);
        let scale = c(0.0, -0.3);
        let lower: Vec<_> = (0..n - 1).map(|i| scale * h.get(i + 1, i)).collect();
        let upper: Vec<_> = (0..n - 1).map(|i| scale * h.get(i, i + 1)).collect();
        let diag: Vec<_> = (0..n).map(|i| shift + scale * h.get(i, i)).collect();
        let tri = Tridiagonal::factor(lower, diag, upper).unwrap();
        let band = BandedLu::factor_shifted(&h, shift, scale).unwrap();
        let rhs: Vec<_> = (0..n).map(|i| c(i as f64, 1.0 - i as f64)).collect();
        let x1 = tri.solve(&rhs);
        let x2 = band.solve(&rhs);
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).norm() < 1e-13);
        }
        let back: Vec<_> = h
            .matvec(&x1)
            .iter()
            .zip(&x1)
            .map(|(hx, x)| shift * x + scale * hx)
            .collect();
        for (a, b) in back.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn krylov_solvers_agree_with_direct_solve() {
        let n = 30;
        let h = laplacian_1d(n);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let shifted = |x: &[f64]| -> Vec<f64> {
            let xc: Vec<_> = x.iter().map(|&v| c(v, 0.0)).collect();
            h.matvec(&xc)
                .iter()
                .zip(x)
                .map(|(hx, x)| hx.re + 0.1 * x)
                .collect()
        };
        let sol = pcg(shifted, |r| r.to_vec(), &rhs, 1e-13, 200).unwrap();
        let rhs_c: Vec<_> = rhs.iter().map(|&v| c(v, 0.0)).collect();
        let apply = |x: &[Complex64]| -> Vec<Complex64> {
            h.matvec(x).iter().zip(x).map(|(hx, x)| hx + 0.1 * x).collect()
        };
        let sol2 = bicgstab(apply, |r| r.to_vec(), &rhs_c, vec![c(0.0, 0.0); n], 1e-13, 500).unwrap();
        for (a, b) in sol.x.iter().zip(&sol2.x) {
            assert!((a - b.re).abs() < 1e-9 && b.im.abs() < 1e-9);
        }
    }

    #[test]
    fn singular_tridiagonal_is_reported() {
        let err = Tridiagonal::factor(
            vec![c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0)],
        );
        assert!(matches!(err, Err(HomogError::LinearSolveFailed(_))));
    }
}
