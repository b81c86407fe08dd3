//! Compressed sparse row matrices and Jacobi-preconditioned conjugate gradients.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from per-row (column, value) lists; columns are sorted and
    /// duplicates summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
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

    /// Dense symmetric tridiagonal matrix (diagonal, first off-diagonal).
    pub fn tridiagonal(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        assert_eq!(off.len() + 1, n.max(1));
        let rows = (0..n)
            .map(|i| {
                let mut r = Vec::with_capacity(3);
                if i > 0 {
                    r.push((i - 1, off[i - 1]));
                }
                r.push((i, diag[i]));
                if i + 1 < n {
                    r.push((i + 1, off[i]));
                }
                r
            })
            .collect();
        Self::from_rows(n, rows)
    }

    /// Kronecker product A ⊗ B with the index of B running fastest.
    pub fn kron(a: &Csr, b: &Csr) -> Self {
        let n = a.n * b.n;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let (i, j) = (r / b.n, r % b.n);
                let mut row = Vec::new();
                for (ia, va) in a.row(i) {
                    for (jb, vb) in b.row(j) {
                        row.push((ia * b.n + jb, va * vb));
                    }
                }
                row
            })
            .collect();
        Self::from_rows(n, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// αA + βB; sparsity patterns are merged.
    pub fn combine(&self, alpha: f64, other: &Csr, beta: f64) -> Csr {
        assert_eq!(self.n, other.n);
        let rows = (0..self.n)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .map(|(c, v)| (c, alpha * v))
                    .chain(other.row(i).map(|(c, v)| (c, beta * v)))
                    .collect()
            })
            .collect();
        Csr::from_rows(self.n, rows)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// ‖b − Ax‖ / ‖b‖ recomputed from scratch at exit.
    pub residual: f64,
}

// Sequential so that results do not depend on the thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG for SPD `a`, starting from `x`.
pub fn pcg(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgReport> {
    let n = a.n();
    if b.len() != n || x.len() != n {
        return Err(Error::ShapeMismatch {
            what: "conjugate gradient vectors",
            expected: n,
            found: b.len().min(x.len()),
        });
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    // Restarting from the true residual recovers the accuracy lost when the
    // recursive residual drifts from b − Ax.
    for _ in 0..RESTARTS {
        iterations += cg_sweep(a, b, x, &inv_diag, tol * bnorm, max_iter - iterations);
        let mut true_r = a.apply(x);
        true_r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        residual = dot(&true_r, &true_r).sqrt() / bnorm;
        if residual <= tol || iterations >= max_iter {
            break;
        }
    }
    if residual > tol {
        return Err(Error::SolverStagnation {
            residual,
            iterations,
        });
    }
    Ok(CgReport {
        iterations,
        residual,
    })
}

const RESTARTS: usize = 4;

fn cg_sweep(a: &Csr, b: &[f64], x: &mut [f64], inv_diag: &[f64], stop: f64, max_iter: usize) -> usize {
    let n = a.n();
    let mut r = a.apply(x);
    r.par_iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        if dot(&r, &r).sqrt() <= stop {
            break;
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        z.par_iter_mut()
            .zip(&r)
            .zip(inv_diag)
            .for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        iterations += 1;
    }
    iterations
}
