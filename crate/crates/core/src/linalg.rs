//! Small dense helpers on `Vec<f64>` state vectors.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(acc: &mut [f64], s: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += s * v;
    }
}

/// Matrix whose columns are the given vectors.
pub fn columns(vs: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, vs.len(), |r, c| vs[c][r])
}

/// Least-squares coefficients of `target` in the span of `vs`, with the
/// relative residual. `None` when the columns are numerically dependent.
pub fn lstsq(vs: &[Vec<f64>], target: &[f64], rank_tol: f64) -> Option<(Vec<f64>, f64)> {
    let n = target.len();
    if vs.is_empty() {
        let r = norm(target);
        return Some((Vec::new(), if r == 0.0 { 0.0 } else { 1.0 }));
    }
    let a = columns(vs, n);
    if rank(&a, rank_tol) < vs.len() {
        return None;
    }
    let b = DVector::from_column_slice(target);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-300).ok()?;
    let resid = (&a * &x - &b).norm();
    let scale = b.norm().max(a.iter().map(|v| v.abs()).fold(0.0, f64::max) * x.norm());
    let rel = if scale == 0.0 { 0.0 } else { resid / scale };
    Some((x.iter().copied().collect(), rel))
}

/// Numerical rank with singular values measured relative to the largest.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Inverse of a square matrix given by columns; rows of the result are the
/// dual basis.
pub fn dual_basis(cols: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, f64)> {
    let n = cols.len();
    let a = columns(cols, n);
    let det = a.determinant();
    let inv = a.try_inverse()?;
    let rows = (0..n).map(|i| inv.row(i).iter().copied().collect()).collect();
    Some((rows, det))
}

/// Exact integral of |a + b s| for s in [0, len].
pub fn abs_linear_integral(a: f64, b: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    let end = a + b * len;
    if a * end >= 0.0 {
        0.5 * (a.abs() + end.abs()) * len
    } else {
        // sign change at s0 = -a / b
        let s0 = -a / b;
        0.5 * a.abs() * s0 + 0.5 * end.abs() * (len - s0)
    }
}
