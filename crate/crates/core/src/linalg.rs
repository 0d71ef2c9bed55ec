//! Solvers for `(I − A) x = b` with `A` nonnegative and strictly substochastic.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Systems up to this many unknowns are solved by dense LU.
pub(crate) const DENSE_LIMIT: usize = 1500;

const KRYLOV_MAX_ITER: usize = 20_000;
const FIXED_POINT_MAX_ITER: usize = 50_000_000;

/// Compressed sparse rows.
#[derive(Debug, Clone, Default)]
pub(crate) struct Csr {
    pub offsets: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn with_rows(rows: usize) -> Self {
        let mut offsets = Vec::with_capacity(rows + 1);
        offsets.push(0);
        Self {
            offsets,
            ..Self::default()
        }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.cols.push(col as u32);
        self.vals.push(val);
    }

    pub fn finish_row(&mut self) {
        self.offsets.push(self.cols.len());
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.vals[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// `y = (I − A) x`.
    fn apply_shifted(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = x[i] - self.row(i).map(|(j, a)| a * x[j]).sum::<f64>();
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.row(i).filter(|&(j, _)| j == i).map(|(_, a)| a).sum())
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖b − (I − A) x‖∞`.
pub(crate) fn residual(a: &Csr, b: &[f64], x: &[f64]) -> f64 {
    let mut y = vec![0.0; x.len()];
    a.apply_shifted(x, &mut y);
    y.iter().zip(b).map(|(yi, bi)| (bi - yi).abs()).fold(0.0, f64::max)
}

/// Solves `(I − A) x = b` to `‖b − (I − A)x‖∞ ≤ tol`.
///
/// Dense LU for small systems, otherwise Jacobi-preconditioned BiCGSTAB with
/// residual correction, falling back to the monotone fixed-point iteration
/// `x ← b + A x` if the Krylov solver breaks down.
pub(crate) fn solve_shifted(a: &Csr, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut x = if n <= DENSE_LIMIT {
        dense_solve(a, b)?
    } else {
        bicgstab(a, b, tol).unwrap_or_else(|| b.to_vec())
    };

    for _ in 0..8 {
        let mut r = vec![0.0; n];
        a.apply_shifted(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        if max_abs(&r) <= tol {
            return Ok(x);
        }
        let Some(dx) = (if n <= DENSE_LIMIT {
            dense_solve(a, &r).ok()
        } else {
            bicgstab(a, &r, tol * 0.5)
        }) else {
            break;
        };
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }

    fixed_point(a, b, x, tol)
}

fn dense_solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for (j, v) in a.row(i) {
            m[(i, j)] -= v;
        }
    }
    m.lu()
        .solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::SolverFailure("singular meeting-time system".into()))
}

fn bicgstab(a: &Csr, b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / (1.0 - d)).collect();
    let precondition = |v: &[f64], out: &mut [f64]| {
        for ((o, vi), d) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = vi * d;
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let target = tol * 0.1;

    for _ in 0..KRYLOV_MAX_ITER {
        let rho_next = dot(&r_hat, &r);
        if rho_next == 0.0 || !rho_next.is_finite() {
            return None;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precondition(&p, &mut p_hat);
        a.apply_shifted(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            return None;
        }
        alpha = rho_next / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if max_abs(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Some(x);
        }
        precondition(&s, &mut s_hat);
        a.apply_shifted(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return None;
        }
        omega = dot(&t, &s) / tt;
        if omega == 0.0 {
            return None;
        }
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_next;
        if max_abs(&r) <= target {
            return Some(x);
        }
    }
    None
}

fn fixed_point(a: &Csr, b: &[f64], mut x: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mut next = vec![0.0; n];
    for _ in 0..FIXED_POINT_MAX_ITER / n.max(1) {
        next.par_iter_mut().enumerate().for_each(|(i, o)| {
            *o = b[i] + a.row(i).map(|(j, v)| v * x[j]).sum::<f64>();
        });
        std::mem::swap(&mut x, &mut next);
        if residual(a, b, &x) <= tol {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure(format!(
        "residual {:e} above {tol:e}",
        residual(a, b, &x)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Random-ish substochastic band matrix.
    fn band(n: usize) -> (Csr, Vec<f64>) {
        let mut a = Csr::with_rows(n);
        for i in 0..n {
            for k in [0usize, 1, 7] {
                a.push((i + k * 3 + 1) % n, 0.33 - 0.001 * ((i + k) % 5) as f64);
            }
            a.finish_row();
        }
        let b = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        (a, b)
    }

    #[test]
    fn dense_and_krylov_agree() {
        let (a, b) = band(400);
        let dense = dense_solve(&a, &b).unwrap();
        let krylov = bicgstab(&a, &b, 1e-12).unwrap();
        for (d, k) in dense.iter().zip(&krylov) {
            assert!((d - k).abs() < 1e-9, "{d} vs {k}");
        }
    }

    #[test]
    fn large_system_meets_residual() {
        let (a, b) = band(5000);
        let x = solve_shifted(&a, &b, 1e-10).unwrap();
        assert!(residual(&a, &b, &x) <= 1e-10);
    }

    #[test]
    fn fixed_point_converges_from_zero() {
        let (a, b) = band(50);
        let x = fixed_point(&a, &b, vec![0.0; 50], 1e-10).unwrap();
        assert!(residual(&a, &b, &x) <= 1e-10);
    }
}
