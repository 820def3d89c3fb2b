//! Small dense kernels used to build factor matrices: Cholesky,
//! Householder reflection and a reduced SVD by one-sided Jacobi sweeps.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math::{dot, norm, sqrt};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self * self^T`.
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(self.row(i), self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        sqrt((0..self.rows).map(|i| self[(i, j)] * self[(i, j)]).sum())
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        norm(self.row(i))
    }

    /// `||self - other||_F`.
    pub fn distance(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        sqrt(self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// Keeps the first `cols` columns.
    pub fn leading_columns(&self, cols: usize) -> Matrix {
        Matrix::from_fn(self.rows, cols, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular `C` with `C C^T = sigma`.
///
/// No jitter is added: a pivot below `1e-12 * max diagonal` is reported as
/// [`Error::NotPositiveDefinite`].
pub fn cholesky(sigma: &Matrix) -> Result<Matrix> {
    let n = sigma.rows();
    if sigma.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: sigma.cols() });
    }
    let max_diag = (0..n).map(|i| sigma[(i, i)]).fold(0.0_f64, f64::max);
    let threshold = 1e-12 * max_diag;
    let mut c = Matrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| c[(j, k)] * c[(j, k)]).sum();
        let pivot = sigma[(j, j)] - s;
        if !(pivot > threshold) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = sqrt(pivot);
        c[(j, j)] = diag;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| c[(i, k)] * c[(j, k)]).sum();
            c[(i, j)] = (sigma[(i, j)] - s) / diag;
        }
    }
    Ok(c)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute(lower: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = lower.rows();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = lower.row(i);
        let s = dot(&row[..i], &x[..i]);
        x[i] = (b[i] - s) / row[i];
    }
    x
}

/// Householder reflection `R = I - 2 v v^T` mapping `e_1` onto `q1`.
///
/// When `q1` is within `1e-14` of `e_1` the reflection is undefined and the
/// identity is returned instead.
pub fn householder_to(q1: &[f64]) -> Result<Matrix> {
    let n = q1.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty reflection target"));
    }
    let len = norm(q1);
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnitVector { norm: len });
    }
    let mut v: Vec<f64> = q1.to_vec();
    v[0] -= 1.0;
    let vlen = norm(&v);
    if vlen < 1e-14 {
        return Ok(Matrix::identity(n));
    }
    v.iter_mut().for_each(|x| *x /= vlen);
    Ok(Matrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - 2.0 * v[i] * v[j]
    }))
}

/// Thin singular value decomposition `a = u diag(d) q^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub d: Vec<f64>,
    pub q: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 60;
const JACOBI_TOL: f64 = 1e-14;

/// Reduced SVD of an `m x n` matrix with `m >= n` by one-sided Jacobi.
///
/// Singular values come out non-increasing. Each pair `(u_j, q_j)` is
/// signed so that the largest-magnitude entry of `u_j` is positive.
pub fn svd_reduced(a: &Matrix) -> Result<Svd> {
    let m = a.rows();
    let n = a.cols();
    if m < n {
        return Err(Error::InvalidInput("svd_reduced needs rows >= cols"));
    }
    if a.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix entries must be finite"));
    }
    // Work column-major: cols[j] is column j of the rotated matrix.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let scale = a.frobenius_norm();
    let tiny = f64::MIN_POSITIVE.max(1e-300 * scale * scale);

    let mut converged = n < 2 || scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        let mut rotated = false;
        // squared norms, refreshed each sweep and updated through the rotations
        let mut sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
        for p in 0..n - 1 {
            for r in p + 1..n {
                let alpha = sq[p];
                let beta = sq[r];
                let gamma = dot(&cols[p], &cols[r]);
                if alpha * beta <= tiny || gamma.abs() <= JACOBI_TOL * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                sq[p] = alpha - t * gamma;
                sq[r] = beta + t * gamma;
                rotate_pair(&mut cols, p, r, c, s);
                rotate_pair(&mut q, p, r, c, s);
            }
        }
        converged = !rotated;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = Matrix::zeros(m, n);
    let mut qm = Matrix::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let cutoff = 1e-15 * scale;
    for (dst, &src) in order.iter().enumerate() {
        let sv = norms[src];
        let mut uj: Vec<f64> = if sv > cutoff {
            cols[src].iter().map(|x| x / sv).collect()
        } else {
            complete_basis(&basis, m)
        };
        let mut qj = q[src].clone();
        let lead = uj.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            uj.iter_mut().for_each(|x| *x = -*x);
            qj.iter_mut().for_each(|x| *x = -*x);
        }
        u.set_column(dst, &uj);
        qm.set_column(dst, &qj);
        d.push(if sv > cutoff { sv } else { 0.0 });
        basis.push(uj);
    }
    Ok(Svd { u, d, q: qm })
}

fn rotate_pair(vs: &mut [Vec<f64>], p: usize, r: usize, c: f64, s: f64) {
    let (head, tail) = vs.split_at_mut(r);
    let vp = &mut head[p];
    let vr = &mut tail[0];
    for (x, y) in vp.iter_mut().zip(vr.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Unit vector orthogonal to every vector in `basis` (Gram-Schmidt over e_i).
fn complete_basis(basis: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best = vec![0.0; m];
    let mut best_norm = -1.0;
    for i in 0..m {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let len = norm(&v);
        if len > best_norm {
            best_norm = len;
            best = v.iter().map(|x| x / len).collect();
        }
        if len > 0.5 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn orthonormality_error(m: &Matrix) -> f64 {
        m.transpose().matmul(m).distance(&Matrix::identity(m.cols()))
    }

    #[test]
    fn cholesky_identity() {
        let c = cholesky(&Matrix::identity(2)).unwrap();
        assert_eq!(c, Matrix::identity(2));
    }

    #[test]
    fn cholesky_two_asset_spread_covariance() {
        let sigma = Matrix::from_row_major(2, 2, vec![0.04, 0.01, 0.01, 0.01]).unwrap();
        let c = cholesky(&sigma).unwrap();
        assert_abs_diff_eq!(c[(0, 0)], 0.2, epsilon = 1e-15);
        assert_eq!(c[(0, 1)], 0.0);
        assert_abs_diff_eq!(c[(1, 0)], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c[(1, 1)], 0.0075_f64.sqrt(), epsilon = 1e-15);
        assert!(c.gram_rows().distance(&sigma) <= 1e-12 * sigma.frobenius_norm());
    }

    #[test]
    fn cholesky_rejects_perfect_correlation() {
        let sigma = Matrix::from_row_major(2, 2, vec![0.04, 0.04, 0.04, 0.04]).unwrap();
        assert!(matches!(cholesky(&sigma), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn forward_substitution_inverts_lower() {
        let l = Matrix::from_row_major(3, 3, vec![2.0, 0.0, 0.0, 1.0, 3.0, 0.0, -1.0, 0.5, 4.0]).unwrap();
        let x = [0.3, -1.2, 2.5];
        let b = l.mul_vec(&x);
        let y = forward_substitute(&l, &b);
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn householder_identity_and_swap() {
        assert_eq!(householder_to(&[1.0, 0.0, 0.0]).unwrap(), Matrix::identity(3));
        let r = householder_to(&[0.0, 1.0]).unwrap();
        let expected = Matrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(r.distance(&expected) < 1e-15);
    }

    #[test]
    fn householder_rejects_non_unit() {
        assert!(matches!(householder_to(&[0.5, 0.5]), Err(Error::NotUnitVector { .. })));
    }

    #[test]
    fn svd_of_single_column() {
        let a = Matrix::from_row_major(2, 1, vec![3.0, 4.0]).unwrap();
        let svd = svd_reduced(&a).unwrap();
        assert_abs_diff_eq!(svd.d[0], 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(svd.u[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(svd.u[(1, 0)], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(svd.q[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn svd_of_identity_block() {
        let a = Matrix::from_fn(4, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let svd = svd_reduced(&a).unwrap();
        for d in &svd.d {
            assert_abs_diff_eq!(*d, 1.0, epsilon = 1e-15);
        }
        assert!(orthonormality_error(&svd.u) < 1e-14);
    }

    #[test]
    fn svd_rank_deficient_completes_basis() {
        let a = Matrix::from_row_major(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let svd = svd_reduced(&a).unwrap();
        assert_eq!(svd.d[1], 0.0);
        assert!(orthonormality_error(&svd.u) < 1e-12);
        let rebuilt = Matrix::from_fn(3, 2, |i, j| {
            (0..2).map(|k| svd.u[(i, k)] * svd.d[k] * svd.q[(j, k)]).sum()
        });
        assert!(rebuilt.distance(&a) < 1e-12);
    }
}
