//! Gauss-Hermite rules for the standard normal density and tensor grids
//! over the numerically integrated factors.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::math::{powf, round, sqrt};

pub const MAX_ORDER: usize = 64;
pub const MAX_GRID_POINTS: u128 = 100_000_000;
/// Cap for [`gauss_hermite_reference`], used by brute-force reference integrals.
pub const MAX_REFERENCE_ORDER: usize = 256;

/// Gauss-Hermite rule with respect to the standard normal density:
/// `E[f(Z)] ~ sum_i weights[i] * f(nodes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

/// Rule of the given order, `1 <= order <= 64`.
///
/// Roots of the orthonormal physicists' Hermite polynomial are located by
/// Sturm-sequence bisection and polished by Newton's method, then mapped to
/// the normal density by `z = x * sqrt(2)` and `w / sqrt(pi)`.
pub fn gauss_hermite(order: usize) -> Result<GaussHermiteRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::OrderOutOfRange { order });
    }
    Ok(build_rule(order))
}

/// Same construction as [`gauss_hermite`] up to order 256. Outer weights
/// fall to ~1e-170 at that size, still inside the normal `f64` range.
pub fn gauss_hermite_reference(order: usize) -> Result<GaussHermiteRule> {
    if order == 0 || order > MAX_REFERENCE_ORDER {
        return Err(Error::OrderOutOfRange { order });
    }
    Ok(build_rule(order))
}

fn build_rule(order: usize) -> GaussHermiteRule {
    let n = order;
    let nf = n as f64;
    let pim4 = powf(PI, -0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    // Roots are the eigenvalues of the Jacobi matrix (zero diagonal,
    // off-diagonal sqrt(k/2)), bracketed one by one through Sturm counts and
    // polished with a Newton step. Asymptotic starting guesses stop
    // separating neighbouring roots at around n = 200.
    let bound = sqrt(2.0 * nf) + 1.0;
    for i in 0..n.div_ceil(2) {
        // i-th largest root, i.e. index n - 1 - i in ascending order
        let k = n - 1 - i;
        let (mut lo, mut hi) = (if i == 0 { 0.0 } else { -bound }, bound);
        if i > 0 {
            hi = x[i - 1];
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sturm_count(n, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut z = 0.5 * (lo + hi);
        let (p1, p2) = hermite_orthonormal(n, z, pim4);
        let step = p1 / (sqrt(2.0 * nf) * p2);
        if step.is_finite() && step.abs() < 1e-10 * (1.0 + z.abs()) {
            z -= step;
        }
        let (_, p2) = hermite_orthonormal(n, z, pim4);
        let pp = sqrt(2.0 * nf) * p2;
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let inv_sqrt_pi = 1.0 / sqrt(PI);
    // descending -> ascending
    let mut nodes: Vec<f64> = x.iter().rev().map(|v| v * SQRT_2).collect();
    let mut weights: Vec<f64> = w.iter().rev().map(|v| v * inv_sqrt_pi).collect();
    // Renormalise the O(1e-16) drift so weights sum to one.
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);
    // exact symmetry
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    GaussHermiteRule { nodes, weights }
}

/// Number of Jacobi-matrix eigenvalues below `x`.
fn sturm_count(n: usize, x: f64) -> usize {
    let mut d = -x;
    let mut count = usize::from(d < 0.0);
    for k in 1..n {
        if d == 0.0 {
            d = f64::EPSILON * (1.0 + x.abs());
        }
        d = -x - 0.5 * k as f64 / d;
        count += usize::from(d < 0.0);
    }
    count
}

/// Returns `(p_n(z), p_{n-1}(z))` of the orthonormal physicists' family.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * sqrt(2.0 / (jf + 1.0)) * p2 - sqrt(jf / (jf + 1.0)) * p3;
    }
    (p1, p2)
}

/// Tensor Gauss-Hermite grid over factors `2..=N'`.
///
/// Points are stored in lexicographic order (last dimension fastest), each
/// as a full state vector whose first (closed-form) coordinate is zero.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    sizes: Vec<usize>,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Per-dimension node counts for factors `2..=N'`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Length of each state vector, `N' = sizes.len() + 1`.
    pub fn state_len(&self) -> usize {
        self.sizes.len() + 1
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, m: usize) -> &[f64] {
        let d = self.state_len();
        &self.points[m * d..(m + 1) * d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.state_len()).zip(self.weights.iter().copied())
    }
}

pub fn tensor_grid(sizes: &[usize]) -> Result<QuadratureGrid> {
    let mut total: u128 = 1;
    for &s in sizes {
        if s == 0 {
            return Err(Error::OrderOutOfRange { order: 0 });
        }
        total = total.saturating_mul(s as u128);
    }
    if total > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge { size: total });
    }
    let rules = sizes.iter().map(|&s| gauss_hermite(s)).collect::<Result<Vec<_>>>()?;
    let total = total as usize;
    let dim = sizes.len() + 1;
    let mut points = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; sizes.len()];
    for _ in 0..total {
        points.push(0.0);
        let mut h = 1.0;
        for (r, &i) in rules.iter().zip(&idx) {
            points.push(r.nodes[i]);
            h *= r.weights[i];
        }
        weights.push(h);
        // odometer, last dimension fastest
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(QuadratureGrid { sizes: sizes.to_vec(), points, weights })
}

/// Node counts `M_j = [ |V_j| / |g^T V_1| * lambda + 1 ]` for factors
/// `j >= 2`. A count of one marks a factor that can be truncated.
pub fn node_size_rule(v: &FactorMatrix, g: &[f64], lambda: f64) -> Vec<usize> {
    let v1 = v.matrix().column(0);
    let scale = crate::math::dot(g, &v1).abs();
    (1..v.factors())
        .map(|j| {
            let ratio = v.matrix().column_norm(j) / scale;
            let m = round(ratio * lambda + 1.0);
            if m.is_finite() {
                (m as usize).clamp(1, MAX_ORDER)
            } else {
                MAX_ORDER
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn normal_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            (1..k).step_by(2).map(|i| i as f64).product()
        }
    }

    #[test]
    fn order_one_two_three() {
        let r = gauss_hermite(1).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert_abs_diff_eq!(r.weights()[0], 1.0, epsilon = 1e-15);

        let r = gauss_hermite(2).unwrap();
        assert_abs_diff_eq!(r.nodes()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.nodes()[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.weights()[0], 0.5, epsilon = 1e-14);

        let r = gauss_hermite(3).unwrap();
        let s3 = 3.0_f64.sqrt();
        assert_abs_diff_eq!(r.nodes()[0], -s3, epsilon = 1e-14);
        assert_eq!(r.nodes()[1], 0.0);
        assert_abs_diff_eq!(r.nodes()[2], s3, epsilon = 1e-14);
        assert_abs_diff_eq!(r.weights()[0], 1.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.weights()[1], 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn order_range_checked() {
        assert!(matches!(gauss_hermite(0), Err(Error::OrderOutOfRange { order: 0 })));
        assert!(matches!(gauss_hermite(65), Err(Error::OrderOutOfRange { order: 65 })));
        assert!(gauss_hermite(64).is_ok());
    }

    #[test]
    fn exact_for_normal_moments() {
        for n in 1..=20 {
            let r = gauss_hermite(n).unwrap();
            for k in 0..(2 * n as u32) {
                let got = r.expect(|z| z.powi(k as i32));
                let want = normal_moment(k);
                let scale = r.expect(|z| z.abs().powi(k as i32));
                let tol = 1e-9 * scale.max(1.0);
                assert!((got - want).abs() <= tol, "n={n} k={k} got={got} want={want}");
            }
        }
    }

    #[test]
    fn high_orders_are_well_formed() {
        for n in [21, 32, 40, 48, 63, 64] {
            let r = gauss_hermite(n).unwrap();
            assert_abs_diff_eq!(r.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights().iter().all(|w| *w > 0.0));
            // second and fourth moments
            assert_abs_diff_eq!(r.expect(|z| z * z), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.expect(|z| z.powi(4)), 3.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn reference_orders() {
        assert!(gauss_hermite(65).is_err());
        assert!(gauss_hermite_reference(257).is_err());
        for n in [64, 100, 150, 200, 256] {
            let r = gauss_hermite_reference(n).unwrap();
            assert_abs_diff_eq!(r.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights().iter().all(|w| *w > 0.0));
            assert_abs_diff_eq!(r.expect(|z| z * z), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.expect(|z| z.powi(4)), 3.0, epsilon = 1e-11);
            assert_abs_diff_eq!(r.expect(|z| (0.7 * z - 0.245).exp()), 1.0, epsilon = 1e-13);
        }
        assert_eq!(gauss_hermite_reference(40).unwrap(), gauss_hermite(40).unwrap());
    }

    #[test]
    fn lognormal_mean_error() {
        let e = |n| gauss_hermite(n).unwrap().expect(|z| (-0.5 + z).exp()) - 1.0;
        let e3 = e(3);
        let e4 = e(4);
        // about -6.3e-3 with 3 nodes and -4.6e-4 with 4
        assert!((e3 - -6.3e-3).abs() < 0.1e-3, "{e3}");
        assert!((e4 - -4.6e-4).abs() < 0.05e-4, "{e4}");
        // closed forms e^{-1/2}(2/3 + cosh(sqrt 3)/3) - 1 and the 4-node analogue
        assert_abs_diff_eq!(e3, -0.006_386_034_333_756_507, epsilon = 1e-15);
        assert_abs_diff_eq!(e4, -0.000_456_299_475_560_917_3, epsilon = 1e-15);
    }

    #[test]
    fn grid_shapes() {
        let g = tensor_grid(&[]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.point(0), &[0.0]);
        assert_eq!(g.weights(), &[1.0]);

        let g = tensor_grid(&[1, 1]).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.point(0), &[0.0, 0.0, 0.0]);

        let g = tensor_grid(&[3, 2]).unwrap();
        assert_eq!(g.len(), 6);
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.point(0)[1], -3.0_f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(g.point(1)[2], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.weights()[0], 1.0 / 12.0, epsilon = 1e-15);

        assert_eq!(tensor_grid(&[5, 5, 5]).unwrap().len(), 125);
    }

    #[test]
    fn grid_guard() {
        assert!(matches!(
            tensor_grid(&[64, 64, 64, 64, 64]),
            Err(Error::GridTooLarge { .. })
        ));
    }
}
