//! Pricing kernel: per-node exercise boundary, closed-form single-factor
//! multi-asset Black-Scholes values, and their quadrature aggregate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::factor::FactorMatrix;
use crate::math::{exp, ln, norm_cdf};
use crate::products::PricingProblem;
use crate::quadrature::QuadratureGrid;

/// Bracket cap on the closed-form coordinate, in standard deviations.
pub const BOUNDARY_CAP: f64 = 60.0;
const MAX_ITERATIONS: usize = 100;

/// Coefficient functions `f_k = exp(-1/2 sum_{j>=2} V_kj^2 + V_k . z)` for a
/// state vector whose first coordinate is zero.
pub fn coefficient_f(v: &FactorMatrix, zdot: &[f64]) -> Result<Vec<f64>> {
    let m = v.matrix();
    if zdot.len() != m.cols() {
        return Err(Error::DimensionMismatch { expected: m.cols(), found: zdot.len() });
    }
    Ok((0..m.rows()).map(|k| coefficient_row(m.row(k), zdot)).collect())
}

#[inline]
fn coefficient_row(row: &[f64], zdot: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 1..row.len() {
        s += row[j] * (zdot[j] - 0.5 * row[j]);
    }
    exp(s)
}

/// `sum_k a_k exp(b_k x) = K` along the closed-form factor, where
/// `a_k = w_k F_k f_k exp(-b_k^2 / 2)` and `b_k = V_k1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProblem {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub strike: f64,
}

impl BoundaryProblem {
    pub fn new(weighted_forwards: &[f64], b: &[f64], strike: f64) -> Self {
        let a = weighted_forwards.iter().zip(b).map(|(x, b)| x * exp(-0.5 * b * b)).collect();
        BoundaryProblem { a, b: b.to_vec(), strike }
    }

    /// `w_k F_k f_k`, the node forwards.
    pub fn weighted_forwards(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a * exp(0.5 * b * b)).collect()
    }

    /// `sum_k a_k exp(b_k x) - K`.
    pub fn residual(&self, x: f64) -> f64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a * exp(b * x)).sum::<f64>() - self.strike
    }
}

/// Exercise boundary `d`: the payoff is positive for `z_1 > -d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub d: f64,
    pub converged: bool,
}

/// Solves for `d` by safeguarded Newton iteration.
///
/// Terms with a positive coefficient only are solved on the log of the sum,
/// which is convex. A strike outside the range of the left-hand side gives
/// `d = +inf` (always exercised) or `d = -inf` (never exercised), as does a
/// root beyond [`BOUNDARY_CAP`].
pub fn solve_boundary(bp: &BoundaryProblem) -> Boundary {
    solve_parts(&bp.a, &bp.b, bp.strike)
}

fn solve_parts(a: &[f64], b: &[f64], strike: f64) -> Boundary {
    let exact = |d| Boundary { d, converged: true };
    // Limits of the left-hand side as x -> -inf and x -> +inf.
    let mut constant = 0.0;
    let (mut to_neg_inf, mut to_pos_inf) = (false, false);
    let mut all_positive = true;
    for (&ak, &bk) in a.iter().zip(b) {
        if ak == 0.0 {
            continue;
        }
        all_positive &= ak > 0.0;
        if bk == 0.0 {
            constant += ak;
        } else if ak > 0.0 {
            to_pos_inf = true;
        } else {
            to_neg_inf = true;
        }
    }
    let lower = if to_neg_inf { f64::NEG_INFINITY } else { constant };
    let upper = if to_pos_inf { f64::INFINITY } else { constant };
    if strike <= lower {
        return exact(f64::INFINITY);
    }
    if strike >= upper {
        return exact(f64::NEG_INFINITY);
    }

    let sum_a: f64 = a.iter().sum();
    let sum_ab: f64 = a.iter().zip(b).map(|(a, b)| a * b).sum();
    let (x0, log_space) = if all_positive {
        // ln sum a e^{bx} ~ ln sum a + (sum ab / sum a) x
        ((ln(strike) - ln(sum_a)) * sum_a / sum_ab, true)
    } else {
        ((strike - sum_a) / sum_ab, false)
    };
    let x0 = if x0.is_finite() { x0.clamp(-BOUNDARY_CAP, BOUNDARY_CAP) } else { 0.0 };
    let ln_k = if log_space { ln(strike) } else { 0.0 };

    // Returns (value, derivative, scale) of the monotone residual.
    let eval = |x: f64| -> (f64, f64, f64) {
        if log_space {
            let mut m = f64::NEG_INFINITY;
            for (&ak, &bk) in a.iter().zip(b) {
                if ak > 0.0 {
                    m = m.max(ln(ak) + bk * x);
                }
            }
            let (mut s, mut ds) = (0.0, 0.0);
            for (&ak, &bk) in a.iter().zip(b) {
                if ak > 0.0 {
                    let e = exp(ln(ak) + bk * x - m);
                    s += e;
                    ds += bk * e;
                }
            }
            (m + ln(s) - ln_k, ds / s, 1.0)
        } else {
            let (mut s, mut ds, mut scale) = (0.0, 0.0, strike.abs());
            for (&ak, &bk) in a.iter().zip(b) {
                let e = ak * exp(bk * x);
                s += e;
                ds += bk * e;
                scale += e.abs();
            }
            (s - strike, ds, scale)
        }
    };

    // Bracket by doubling steps away from the initial guess.
    let (f0, _, _) = eval(x0);
    if f0 == 0.0 {
        return exact(-x0);
    }
    let (mut lo, mut hi);
    let mut step = 1.0;
    if f0 > 0.0 {
        hi = x0;
        loop {
            let x = (x0 - step).max(-BOUNDARY_CAP);
            if eval(x).0 <= 0.0 {
                lo = x;
                break;
            }
            if x <= -BOUNDARY_CAP {
                return exact(f64::INFINITY);
            }
            hi = x;
            step *= 2.0;
        }
    } else {
        lo = x0;
        loop {
            let x = (x0 + step).min(BOUNDARY_CAP);
            if eval(x).0 >= 0.0 {
                hi = x;
                break;
            }
            if x >= BOUNDARY_CAP {
                return exact(f64::NEG_INFINITY);
            }
            lo = x;
            step *= 2.0;
        }
    }

    let mut x = if f0 > 0.0 { hi } else { lo };
    for _ in 0..MAX_ITERATIONS {
        let (fx, dfx, scale) = eval(x);
        let tol = if log_space { 1e-15 } else { 1e-14 * scale };
        if fx.abs() <= tol {
            return exact(-x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return exact(-next);
        }
        x = next;
    }
    Boundary { d: -x, converged: false }
}

/// `sum_k w_k F_k f_k N(d + b_k) - K N(d)`.
pub fn bs_multi_call(bp: &BoundaryProblem, d: f64) -> f64 {
    let fwd = bp.weighted_forwards();
    call_from_parts(&fwd, &bp.b, bp.strike, d)
}

/// `K N(-d) - sum_k w_k F_k f_k N(-d - b_k)`.
pub fn bs_multi_put(bp: &BoundaryProblem, d: f64) -> f64 {
    let fwd = bp.weighted_forwards();
    put_from_parts(&fwd, &bp.b, bp.strike, d)
}

#[inline]
fn call_from_parts(fwd: &[f64], b: &[f64], strike: f64, d: f64) -> f64 {
    fwd.iter().zip(b).map(|(f, b)| f * norm_cdf(d + b)).sum::<f64>() - strike * norm_cdf(d)
}

#[inline]
fn put_from_parts(fwd: &[f64], b: &[f64], strike: f64, d: f64) -> f64 {
    strike * norm_cdf(-d) - fwd.iter().zip(b).map(|(f, b)| f * norm_cdf(-d - b)).sum::<f64>()
}

/// Quadrature aggregate for one strike. Prices are forward values; use
/// [`PricingResult::present_value`] for discounting.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub strike: f64,
    pub call: f64,
    pub put: f64,
    pub binary: f64,
    /// Prices corrected with the node forwards as control variates.
    pub call_cv: f64,
    pub put_cv: f64,
    /// Forward deltas `dC / dF_k`.
    pub deltas: Vec<f64>,
    /// Quadrature means of the coefficient functions.
    pub fbar: Vec<f64>,
    pub grid_size: usize,
    pub boundary_failures: usize,
    pub control_variate: bool,
    pub discount_factor: f64,
}

impl PricingResult {
    /// Headline call value (corrected when the control variate is on).
    pub fn call_value(&self) -> f64 {
        if self.control_variate {
            self.call_cv
        } else {
            self.call
        }
    }

    pub fn put_value(&self) -> f64 {
        if self.control_variate {
            self.put_cv
        } else {
            self.put
        }
    }

    /// Discounts prices, binary and deltas by `exp(-rT)`.
    pub fn present_value(&self) -> PricingResult {
        let df = self.discount_factor;
        PricingResult {
            call: self.call * df,
            put: self.put * df,
            binary: self.binary * df,
            call_cv: self.call_cv * df,
            put_cv: self.put_cv * df,
            deltas: self.deltas.iter().map(|x| x * df).collect(),
            discount_factor: 1.0,
            ..self.clone()
        }
    }

    pub fn is_reliable(&self) -> bool {
        self.boundary_failures == 0
    }
}

/// Prices one strike. See [`price_strikes`].
pub fn price(
    problem: &PricingProblem,
    v: &FactorMatrix,
    grid: &QuadratureGrid,
    strike: f64,
    cv: bool,
) -> Result<PricingResult> {
    Ok(price_strikes(problem, v, grid, &[strike], cv)?.remove(0))
}

struct Accumulator {
    call: f64,
    put: f64,
    binary: f64,
    deltas: Vec<f64>,
    failures: usize,
}

/// Weighted sum of closed-form values over the grid for several strikes,
/// sharing the coefficient functions of every node. Node order is the
/// grid's lexicographic order, so results do not depend on scheduling.
pub fn price_strikes(
    problem: &PricingProblem,
    v: &FactorMatrix,
    grid: &QuadratureGrid,
    strikes: &[f64],
    cv: bool,
) -> Result<Vec<PricingResult>> {
    let n = problem.dim();
    let m = v.matrix();
    if m.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.rows() });
    }
    if grid.state_len() != m.cols() {
        return Err(Error::DimensionMismatch { expected: m.cols(), found: grid.state_len() });
    }
    let w = &problem.weights;
    let b: Vec<f64> = (0..n).map(|k| m[(k, 0)]).collect();
    let wf: Vec<f64> = w.iter().zip(&problem.forwards).map(|(w, f)| w * f).collect();
    let damp: Vec<f64> = b.iter().map(|b| exp(-0.5 * b * b)).collect();

    let mut acc: Vec<Accumulator> = strikes
        .iter()
        .map(|_| Accumulator { call: 0.0, put: 0.0, binary: 0.0, deltas: vec![0.0; n], failures: 0 })
        .collect();
    let mut fbar = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut node_fwd = vec![0.0; n];
    let mut a = vec![0.0; n];

    for (z, h) in grid.iter() {
        for k in 0..n {
            f[k] = coefficient_row(m.row(k), z);
            node_fwd[k] = wf[k] * f[k];
            a[k] = node_fwd[k] * damp[k];
            fbar[k] += h * f[k];
        }
        for (acc, &strike) in acc.iter_mut().zip(strikes) {
            let k_eff = problem.effective_strike(strike);
            let bd = solve_parts(&a, &b, k_eff);
            if !bd.converged {
                acc.failures += 1;
            }
            let d = bd.d;
            acc.call += h * call_from_parts(&node_fwd, &b, k_eff, d);
            acc.put += h * put_from_parts(&node_fwd, &b, k_eff, d);
            acc.binary += h * norm_cdf(d);
            for k in 0..n {
                acc.deltas[k] += h * f[k] * norm_cdf(d + b[k]);
            }
        }
    }

    let df = problem.discount_factor();
    Ok(acc
        .into_iter()
        .zip(strikes)
        .map(|(acc, &strike)| {
            let deltas: Vec<f64> = acc.deltas.iter().zip(w).map(|(x, w)| w * x).collect();
            let mut call_adj = 0.0;
            let mut put_adj = 0.0;
            for k in 0..n {
                let mis = problem.forwards[k] * (fbar[k] - 1.0);
                call_adj += deltas[k] * mis;
                put_adj += (deltas[k] - w[k]) * mis;
            }
            PricingResult {
                strike,
                call: acc.call,
                put: acc.put,
                binary: acc.binary,
                call_cv: acc.call - call_adj,
                put_cv: acc.put - put_adj,
                deltas,
                fbar: fbar.clone(),
                grid_size: grid.len(),
                boundary_failures: acc.failures,
                control_variate: cv,
                discount_factor: df,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::SQRT_2;

    #[test]
    fn coefficient_values() {
        let v = FactorMatrix::from_matrix(Matrix::from_row_major(1, 2, vec![0.3, 0.1]).unwrap());
        let f = coefficient_f(&v, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(f[0], (0.1_f64 - 0.005).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(f[0], 1.099_658_855_126_102_8, epsilon = 1e-15);
        let f0 = coefficient_f(&v, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(f0[0], (-0.005_f64).exp(), epsilon = 1e-16);
        let scalar = FactorMatrix::from_matrix(Matrix::from_row_major(1, 1, vec![0.2]).unwrap());
        assert_eq!(coefficient_f(&scalar, &[0.0]).unwrap(), vec![1.0]);
        assert!(coefficient_f(&v, &[0.0]).is_err());
    }

    #[test]
    fn single_asset_boundary() {
        let bp = BoundaryProblem::new(&[100.0], &[0.2], 100.0);
        let bd = solve_boundary(&bp);
        assert!(bd.converged);
        assert_abs_diff_eq!(bd.d, -0.1, epsilon = 1e-14);
        let call = bs_multi_call(&bp, bd.d);
        let put = bs_multi_put(&bp, bd.d);
        assert_abs_diff_eq!(call, 7.965_567_455_405_804, epsilon = 1e-11);
        assert_abs_diff_eq!(put, call, epsilon = 1e-12);
    }

    #[test]
    fn boundary_limits() {
        let bp = BoundaryProblem::new(&[50.0, 50.0], &[0.3, 0.2], 0.0);
        assert_eq!(solve_boundary(&bp).d, f64::INFINITY);
        assert_abs_diff_eq!(bs_multi_call(&bp, f64::INFINITY), 100.0, epsilon = 1e-12);
        assert_eq!(bs_multi_put(&bp, f64::INFINITY), 0.0);
        assert_eq!(bs_multi_call(&bp, f64::NEG_INFINITY), 0.0);
        // all-negative weights never reach a positive strike
        let bp = BoundaryProblem::new(&[-50.0], &[-0.3], 1.0);
        assert_eq!(solve_boundary(&bp).d, f64::NEG_INFINITY);
        // a zero loading bounds the range from below
        let bp = BoundaryProblem::new(&[1.0, 3.0], &[1.0, 0.0], 2.0);
        assert_eq!(solve_boundary(&bp).d, f64::INFINITY);
    }

    #[test]
    fn rotated_two_asset_example_boundary() {
        // payoff e^{(z1 - z2)/sqrt2} + e^{(z1 + z2)/sqrt2} against K
        let b = 1.0 / SQRT_2;
        for (k, z2) in [(4.0, 0.0), (4.0, 1.3), (2.0, -0.7)] {
            let a: Vec<f64> = [(-z2 * b).exp(), (z2 * b).exp()].to_vec();
            let bp = BoundaryProblem { a, b: vec![b, b], strike: k };
            let d = solve_boundary(&bp).d;
            let want = SQRT_2 * (2.0 * (z2 / SQRT_2).cosh() / k).ln();
            assert_abs_diff_eq!(d, want, epsilon = 1e-13);
        }
        // at z2 = 0, K = 4 the boundary sits at z1 = -d = sqrt(2) ln 2
        let bp = BoundaryProblem { a: vec![1.0, 1.0], b: vec![b, b], strike: 4.0 };
        assert_abs_diff_eq!(-solve_boundary(&bp).d, SQRT_2 * 2.0_f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(SQRT_2 * 2.0_f64.ln(), 0.9803, epsilon = 1e-4);
    }

    #[test]
    fn spread_boundary_residual() {
        let bp = BoundaryProblem::new(&[105.0, -101.0], &[0.172, -0.001], 2.5);
        let bd = solve_boundary(&bp);
        assert!(bd.converged);
        let scale = bp.a.iter().map(|a| a.abs()).sum::<f64>().max(2.5);
        assert!(bp.residual(-bd.d).abs() <= 1e-12 * scale);
    }

    #[test]
    fn node_parity() {
        let bp = BoundaryProblem::new(&[60.0, 45.0, -30.0], &[0.4, 0.2, -0.05], 70.0);
        let d = solve_boundary(&bp).d;
        let parity = bs_multi_call(&bp, d) - bs_multi_put(&bp, d) - (75.0 - 70.0);
        assert!(parity.abs() < 1e-12);
    }
}
