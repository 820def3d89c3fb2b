//! Covariance construction and the rotated factor matrix.
//!
//! The first factor is aligned with `Sigma g`, where `g` is the normalised
//! vector of forward-weighted basket weights. Where that column disagrees in
//! sign with the weights it is pushed back into the conforming region and
//! renormalised through `C^{-1}`. The remaining factors are the reduced SVD
//! of the Householder-completed complement, ordered by strength.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Deref;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, forward_substitute, householder_to, svd_reduced, Matrix};
use crate::math::{dot, norm, sin, sqrt};
use crate::products::PricingProblem;

pub const DEFAULT_EPSILON: f64 = 0.01;

/// Covariance of the log prices, `rho_kj sigma_k sigma_j min(t_k, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(Matrix);

impl CovarianceMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn variances(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.0[(k, k)]).collect()
    }
}

impl Deref for CovarianceMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

pub fn build_covariance(problem: &PricingProblem) -> Result<CovarianceMatrix> {
    let n = problem.dim();
    let rho = &problem.correlation;
    if rho.rows() != n || rho.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.rows() });
    }
    for k in 0..n {
        if !(problem.vols[k] > 0.0) {
            return Err(Error::InvalidInput("volatilities must be positive"));
        }
        if !(problem.times[k] > 0.0) {
            return Err(Error::InvalidInput("observation times must be positive"));
        }
        for j in 0..n {
            let r = rho[(k, j)];
            let bad = !r.is_finite()
                || r.abs() > 1.0
                || r != rho[(j, k)]
                || (k == j && r != 1.0);
            if bad {
                return Err(Error::InvalidCorrelation { row: k, col: j, value: r });
            }
        }
    }
    let (s, t) = (&problem.vols, &problem.times);
    Ok(CovarianceMatrix(Matrix::from_fn(n, n, |k, j| {
        rho[(k, j)] * s[k] * s[j] * t[k].min(t[j])
    })))
}

/// Closed-form Cholesky factor of a single Brownian path observed at
/// increasing times: `C_kj = vol * sqrt(t_j - t_{j-1})` for `k >= j`.
pub fn asian_cholesky(vol: f64, times: &[f64]) -> Result<Matrix> {
    let mut prev = 0.0;
    let mut steps = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        if !(t > prev) {
            return Err(Error::NonIncreasingTimes { index: i });
        }
        steps.push(vol * sqrt(t - prev));
        prev = t;
    }
    let n = times.len();
    Ok(Matrix::from_fn(n, n, |k, j| if k >= j { steps[j] } else { 0.0 }))
}

/// Cholesky factor of the problem's covariance, using the closed form when
/// the assets are observations of one path.
pub fn cholesky_factor(problem: &PricingProblem, sigma: &CovarianceMatrix) -> Result<Matrix> {
    match problem.single_path_vol() {
        Some(vol) => asian_cholesky(vol, &problem.times),
        None => cholesky(sigma),
    }
}

/// Unit vector `g` proportional to `w_k F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardWeights {
    pub g: Vec<f64>,
    pub raw: Vec<f64>,
}

pub fn forward_weights(problem: &PricingProblem) -> Result<ForwardWeights> {
    let raw: Vec<f64> = problem.weights.iter().zip(&problem.forwards).map(|(w, f)| w * f).collect();
    let len = norm(&raw);
    if len == 0.0 || !len.is_finite() {
        return Err(Error::AllZeroWeights);
    }
    Ok(ForwardWeights { g: raw.iter().map(|x| x / len).collect(), raw })
}

/// First column of the factor matrix and its rotation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstFactor {
    pub v1: Vec<f64>,
    pub q1: Vec<f64>,
    pub mu: f64,
    pub adjusted: bool,
}

/// Optimal first factor `V_1 = Sigma g / sqrt(g^T Sigma g)`, adjusted so that
/// `w_k V_k1 > 0` for every asset.
///
/// Offending entries are replaced by `epsilon * sign(w_k) * sqrt(Sigma_kk)`;
/// the column is then rescaled by `mu` so that `Q_1 = C^{-1} V_1` has unit
/// length.
pub fn first_factor(
    sigma: &CovarianceMatrix,
    c: &Matrix,
    weights: &[f64],
    g: &ForwardWeights,
    epsilon: f64,
) -> Result<FirstFactor> {
    if !(epsilon > 0.0 && epsilon <= 0.1) {
        return Err(Error::InvalidInput("epsilon must lie in (0, 0.1]"));
    }
    let n = sigma.dim();
    if g.g.len() != n || weights.len() != n || c.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.g.len() });
    }
    let sg = sigma.mul_vec(&g.g);
    let gsg = dot(&g.g, &sg);
    if !(gsg > 0.0) {
        return Err(Error::NotPositiveDefinite { index: 0, pivot: gsg });
    }
    let scale = sqrt(gsg);
    let mut v1: Vec<f64> = sg.iter().map(|x| x / scale).collect();
    let mut adjusted = false;
    for k in 0..n {
        if weights[k] * v1[k] <= 0.0 {
            adjusted = true;
            v1[k] = epsilon * weights[k].signum() * sqrt(sigma[(k, k)]);
        }
    }
    let raw_q1 = forward_substitute(c, &v1);
    let len = norm(&raw_q1);
    let mu = if adjusted { 1.0 / len } else { 1.0 };
    let q1: Vec<f64> = raw_q1.iter().map(|x| x / len).collect();
    // V_1 = C Q_1 keeps V V^T = Sigma exact after the adjustment.
    let v1 = c.mul_vec(&q1);
    Ok(FirstFactor { v1, q1, mu, adjusted })
}

/// Factor matrix `V` (assets x factors) with `V V^T = Sigma` when untruncated.
#[derive(Debug, Clone)]
pub struct FactorMatrix {
    v: Matrix,
    q1: Option<Vec<f64>>,
    rotation: Option<Matrix>,
    adjusted: bool,
    mu: f64,
    residual: Vec<f64>,
    total_variance: f64,
}

impl FactorMatrix {
    /// Wraps an arbitrary square-root matrix (e.g. a raw Cholesky factor).
    pub fn from_matrix(v: Matrix) -> Self {
        let total_variance = v.as_slice().iter().map(|x| x * x).sum();
        FactorMatrix {
            residual: vec![0.0; v.rows()],
            v,
            q1: None,
            rotation: None,
            adjusted: false,
            mu: 1.0,
            total_variance,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.v
    }

    pub fn assets(&self) -> usize {
        self.v.rows()
    }

    /// Number of retained factors `N'`.
    pub fn factors(&self) -> usize {
        self.v.cols()
    }

    pub fn first_column(&self) -> Vec<f64> {
        self.v.column(0)
    }

    pub fn q1(&self) -> Option<&[f64]> {
        self.q1.as_deref()
    }

    /// Full rotation `Q` with `V = C Q`, when built by
    /// [`assemble_factor_matrix`].
    pub fn rotation(&self) -> Option<&Matrix> {
        self.rotation.as_ref()
    }

    pub fn adjusted(&self) -> bool {
        self.adjusted
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Per-asset variance carried by truncated factors.
    pub fn residual_variance(&self) -> &[f64] {
        &self.residual
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.factors()).map(|j| self.v.column_norm(j)).collect()
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.assets()).map(|k| self.v.row_norm(k)).collect()
    }

    /// Frobenius norm of the untruncated matrix, `sqrt(sum_k Sigma_kk)`.
    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.total_variance)
    }

    pub fn is_truncated(&self) -> bool {
        self.v.cols() < self.v.rows()
    }

    pub(crate) fn with_first_factor(mut self, ff: &FirstFactor) -> Self {
        self.adjusted = ff.adjusted;
        self.mu = ff.mu;
        self
    }
}

/// `V = (C q1 | U D)` where `C (R_2 .. R_N) = U D Q^T` and `R` is the
/// Householder reflection taking `e_1` to `q1`.
pub fn assemble_factor_matrix(c: &Matrix, q1: &[f64]) -> Result<FactorMatrix> {
    let n = c.rows();
    if q1.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q1.len() });
    }
    let r = householder_to(q1)?;
    let v1 = c.mul_vec(q1);
    let mut v = Matrix::zeros(n, n);
    v.set_column(0, &v1);
    let mut q = Matrix::zeros(n, n);
    if n > 1 {
        let rest = Matrix::from_fn(n, n - 1, |i, j| r[(i, j + 1)]);
        let a = c.matmul(&rest);
        let svd = svd_reduced(&a)?;
        for j in 0..n - 1 {
            let col: Vec<f64> = (0..n).map(|i| svd.u[(i, j)] * svd.d[j]).collect();
            v.set_column(j + 1, &col);
        }
        // Q = R * blockdiag(1, Q_dot)
        let mut block = Matrix::zeros(n, n);
        block[(0, 0)] = 1.0;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                block[(i + 1, j + 1)] = svd.q[(i, j)];
            }
        }
        q = r.matmul(&block);
    } else {
        q[(0, 0)] = r[(0, 0)];
    }
    let mut fm = FactorMatrix::from_matrix(v);
    fm.q1 = Some(q1.to_vec());
    fm.rotation = Some(q);
    Ok(fm)
}

/// Rotated factor matrix for a problem, with the sign adjustment applied.
pub fn build_factor_matrix(problem: &PricingProblem) -> Result<(FactorMatrix, ForwardWeights)> {
    let sigma = build_covariance(problem)?;
    let c = cholesky_factor(problem, &sigma)?;
    let g = forward_weights(problem)?;
    let ff = first_factor(&sigma, &c, &problem.weights, &g, problem.epsilon)?;
    let v = assemble_factor_matrix(&c, &ff.q1)?.with_first_factor(&ff);
    Ok((v, g))
}

/// Keeps the first `keep` factors and records the dropped variance per asset.
pub fn reduce(v: &FactorMatrix, keep: usize) -> Result<FactorMatrix> {
    if keep == 0 || keep > v.factors() {
        return Err(Error::InvalidInput("keep must be between 1 and the factor count"));
    }
    if keep == v.factors() {
        return Ok(v.clone());
    }
    let m = v.matrix();
    let residual = (0..m.rows())
        .map(|k| v.residual[k] + m.row(k)[keep..].iter().map(|x| x * x).sum::<f64>())
        .collect();
    Ok(FactorMatrix {
        v: m.leading_columns(keep),
        q1: v.q1.clone(),
        rotation: v.rotation.clone(),
        adjusted: v.adjusted,
        mu: v.mu,
        residual,
        total_variance: v.total_variance,
    })
}

/// Fraction of total variance carried by the first `keep` factors.
pub fn explained_variance(v: &FactorMatrix, keep: usize) -> f64 {
    let keep = keep.min(v.factors());
    let explained: f64 = (0..keep).map(|j| {
        let c = v.matrix().column_norm(j);
        c * c
    }).sum();
    (explained / v.total_variance).min(1.0)
}

/// Karhunen-Loeve basis function `j` of standard Brownian motion on `[0, 1]`.
pub fn kl_factor(j: usize, t: f64) -> f64 {
    let freq = (j as f64 - 0.5) * PI;
    core::f64::consts::SQRT_2 / freq * sin(freq * t)
}

/// Continuum limit of the first factor for a uniformly weighted average of
/// standard Brownian motion on `[0, 1]`: `sqrt(3) (t - t^2 / 2)`.
pub fn continuous_first_factor(t: f64) -> f64 {
    sqrt(3.0) * (t - 0.5 * t * t)
}

/// `V V^T` for diagnostics.
pub fn reconstruct(v: &FactorMatrix) -> Matrix {
    v.matrix().gram_rows()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::products::{self, presets};
    use approx::assert_abs_diff_eq;

    #[test]
    fn covariance_of_spread_set() {
        let p = presets::s1(&[0.0]);
        let s = build_covariance(&p).unwrap();
        let want = [0.04, 0.01, 0.01, 0.01];
        for (a, b) in s.as_slice().iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-16);
        }
    }

    #[test]
    fn covariance_of_two_observation_path() {
        let p = products::asian_discrete(100.0, 1.0, 0.0, 0.0, &[0.5, 1.0], &[0.5, 0.5], &[100.0]).unwrap();
        let s = build_covariance(&p).unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn covariance_single_asset() {
        let p = products::basket(&[1.0], &[100.0], &[0.0], &[0.3], 2.0, 0.0, 0.0, &[100.0]).unwrap();
        let s = build_covariance(&p).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 0.18, epsilon = 1e-16);
    }

    #[test]
    fn covariance_rejects_bad_correlation() {
        let mut p = presets::s1(&[0.0]);
        p.correlation[(0, 1)] = 1.2;
        p.correlation[(1, 0)] = 1.2;
        assert!(matches!(build_covariance(&p), Err(Error::InvalidCorrelation { .. })));
        let mut p = presets::s1(&[0.0]);
        p.correlation[(0, 1)] = 0.3;
        assert!(matches!(build_covariance(&p), Err(Error::InvalidCorrelation { .. })));
    }

    #[test]
    fn asian_cholesky_closed_form() {
        assert_eq!(asian_cholesky(1.0, &[1.0]).unwrap().as_slice(), &[1.0]);
        let c = asian_cholesky(0.3, &[0.5, 1.0]).unwrap();
        let e = 0.3 * 0.5_f64.sqrt();
        assert_abs_diff_eq!(c[(0, 0)], e, epsilon = 1e-16);
        assert_eq!(c[(0, 1)], 0.0);
        assert_abs_diff_eq!(c[(1, 0)], e, epsilon = 1e-16);
        assert_abs_diff_eq!(c[(1, 1)], e, epsilon = 1e-16);
        assert!(matches!(asian_cholesky(0.3, &[0.5, 0.5]), Err(Error::NonIncreasingTimes { index: 1 })));
    }

    #[test]
    fn asian_cholesky_agrees_with_generic() {
        let times: Vec<f64> = (1..=50).map(|k| k as f64 / 50.0).collect();
        let w = vec![1.0 / 50.0; 50];
        let p = products::asian_discrete(100.0, 0.25, 0.0, 0.0, &times, &w, &[100.0]).unwrap();
        let s = build_covariance(&p).unwrap();
        let generic = cholesky(&s).unwrap();
        let closed = asian_cholesky(0.25, &times).unwrap();
        assert!(generic.distance(&closed) < 1e-13);
    }

    #[test]
    fn forward_weights_of_presets() {
        let g = forward_weights(&presets::s1(&[0.0])).unwrap();
        assert_abs_diff_eq!(g.g[0], 0.721, epsilon = 5e-4);
        assert_abs_diff_eq!(g.g[1], -0.693, epsilon = 5e-4);
        let g = forward_weights(&presets::b1(0.4, 0.5, &[100.0])).unwrap();
        for x in g.g {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-15);
        }
        let p = products::basket(&[1.0], &[100.0], &[0.0], &[0.3], 2.0, 0.0, 0.0, &[100.0]).unwrap();
        assert_eq!(forward_weights(&p).unwrap().g, vec![1.0]);
    }

    #[test]
    fn forward_weights_all_zero() {
        let mut p = presets::s1(&[0.0]);
        p.weights = vec![0.0, 0.0];
        assert!(matches!(forward_weights(&p), Err(Error::AllZeroWeights)));
    }

    #[test]
    fn spread_first_factor_is_adjusted() {
        let p = presets::s1(&[0.0]);
        let (v, g) = build_factor_matrix(&p).unwrap();
        assert!(v.adjusted());
        let v1 = v.first_column();
        assert_abs_diff_eq!(v1[0], 0.172, epsilon = 5e-4);
        assert_abs_diff_eq!(v1[1], -0.001, epsilon = 5e-4);
        assert!(v1[1] < 0.0);
        assert_abs_diff_eq!(dot(&g.g, &v1), 0.125, epsilon = 5e-4);
        assert!(v.mu() < 1.0);
    }

    #[test]
    fn basket_first_factor_is_not_adjusted() {
        let p = presets::b1(0.4, 0.5, &[100.0]);
        let (v, g) = build_factor_matrix(&p).unwrap();
        assert!(!v.adjusted());
        assert_eq!(v.mu(), 1.0);
        for x in v.first_column() {
            assert_abs_diff_eq!(x, 0.5_f64.sqrt(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(dot(&g.g, &v.first_column()), 2.0_f64.sqrt(), epsilon = 1e-12);
        let norms = v.column_norms();
        assert_abs_diff_eq!(norms[0], 2.0_f64.sqrt(), epsilon = 1e-12);
        for n in &norms[1..] {
            assert_abs_diff_eq!(*n, 0.632, epsilon = 5e-4);
        }
        for r in v.row_norms() {
            assert_abs_diff_eq!(r, 0.894, epsilon = 5e-4);
        }
    }

    #[test]
    fn scalar_problem() {
        let p = products::basket(&[1.0], &[100.0], &[0.0], &[0.3], 2.0, 0.0, 0.0, &[100.0]).unwrap();
        let (v, _) = build_factor_matrix(&p).unwrap();
        assert_eq!(v.factors(), 1);
        assert_abs_diff_eq!(v.matrix()[(0, 0)], 0.3 * 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn spread_correlation_flip_swaps_columns() {
        let (vp, _) = build_factor_matrix(&presets::s2(0.9)).unwrap();
        let (vn, _) = build_factor_matrix(&presets::s2(-0.9)).unwrap();
        let a = vp.matrix();
        let b = vn.matrix();
        for k in 0..2 {
            assert_abs_diff_eq!(a[(k, 0)].abs(), b[(k, 1)].abs(), epsilon = 1e-12);
            assert_abs_diff_eq!(a[(k, 1)].abs(), b[(k, 0)].abs(), epsilon = 1e-12);
        }
        // 90%: (0.034, 0.146 / -0.067, 0.292); -90%: (0.146, 0.034 / -0.292, 0.067)
        assert_abs_diff_eq!(a[(0, 0)], 0.034, epsilon = 5e-4);
        assert_abs_diff_eq!(a[(1, 0)], -0.067, epsilon = 5e-4);
        assert_abs_diff_eq!(b[(0, 0)], 0.146, epsilon = 5e-4);
        assert_abs_diff_eq!(b[(1, 0)], -0.292, epsilon = 5e-4);
    }

    #[test]
    fn reduce_keeps_leading_columns() {
        let p = presets::b1(0.4, 0.5, &[100.0]);
        let (v, _) = build_factor_matrix(&p).unwrap();
        let same = reduce(&v, 4).unwrap();
        assert_eq!(same.matrix(), v.matrix());
        let r = reduce(&v, 2).unwrap();
        assert_eq!(r.factors(), 2);
        for k in 0..4 {
            let kept: f64 = r.matrix().row(k).iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(kept + r.residual_variance()[k], 0.8, epsilon = 1e-12);
        }
        assert!(reduce(&v, 0).is_err());
        assert!(reduce(&v, 5).is_err());
    }

    #[test]
    fn kl_and_continuous_factor_values() {
        assert_abs_diff_eq!(kl_factor(1, 1.0), 2.0 * 2.0_f64.sqrt() / PI, epsilon = 1e-15);
        assert_eq!(kl_factor(3, 0.0), 0.0);
        assert_abs_diff_eq!(continuous_first_factor(1.0), 3.0_f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_eq!(continuous_first_factor(0.0), 0.0);
    }

    #[test]
    fn function_norms_by_simpson() {
        let n = 2000;
        let h = 1.0 / n as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            (0..=n)
                .map(|i| {
                    let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    c * f(i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let kl2 = simpson(&|t| kl_factor(1, t).powi(2)).sqrt();
        let v2 = simpson(&|t| continuous_first_factor(t).powi(2)).sqrt();
        let v_int = simpson(&|t| continuous_first_factor(t));
        let kl_int = simpson(&|t| kl_factor(1, t));
        assert_abs_diff_eq!(kl2, 2.0 / PI, epsilon = 1e-10);
        assert_abs_diff_eq!(v2, (0.4_f64).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(v_int, 1.0 / 3.0_f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(kl_int, 4.0 * 2.0_f64.sqrt() / (PI * PI), epsilon = 1e-10);
        assert!(kl2 > v2 && v_int > kl_int);
    }
}
