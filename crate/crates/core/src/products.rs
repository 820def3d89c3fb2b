//! Contract descriptions mapped onto the generic problem
//! `(sum_k w_k S_k(t_k) + fixed_leg - K)^+` under correlated GBMs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::factor::DEFAULT_EPSILON;
use crate::linalg::Matrix;
use crate::math::{exp, round};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductKind {
    Spread,
    Basket,
    AsianDiscrete,
    AsianContinuous,
}

/// Inputs of the pricing integral. Strikes are in currency units of the
/// payoff; `fixed_leg` is a known amount added to the basket (the weight on
/// an observation at time zero) and is netted against the strike.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingProblem {
    pub kind: ProductKind,
    pub weights: Vec<f64>,
    pub forwards: Vec<f64>,
    pub vols: Vec<f64>,
    pub times: Vec<f64>,
    pub correlation: Matrix,
    pub rate: f64,
    pub expiry: f64,
    pub fixed_leg: f64,
    pub strikes: Vec<f64>,
    /// Push-back size for first-factor entries of the wrong sign.
    pub epsilon: f64,
}

impl PricingProblem {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn discount_factor(&self) -> f64 {
        exp(-self.rate * self.expiry)
    }

    /// Strike seen by the random part of the basket.
    pub fn effective_strike(&self, strike: f64) -> f64 {
        strike - self.fixed_leg
    }

    /// `sum_k w_k F_k` plus the fixed leg.
    pub fn basket_forward(&self) -> f64 {
        self.weights.iter().zip(&self.forwards).map(|(w, f)| w * f).sum::<f64>() + self.fixed_leg
    }

    /// Volatility when every asset is an observation of one Brownian path
    /// (equal vols, unit correlation, strictly increasing times).
    pub fn single_path_vol(&self) -> Option<f64> {
        let n = self.dim();
        let vol = *self.vols.first()?;
        let same_vol = self.vols.iter().all(|&v| v == vol);
        let increasing = self.times.windows(2).all(|w| w[0] < w[1]) && self.times[0] > 0.0;
        let unit_corr = self.correlation.as_slice().iter().all(|&r| r == 1.0);
        (n > 0 && same_vol && increasing && unit_corr).then_some(vol)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidInput("problem has no assets"));
        }
        for len in [self.forwards.len(), self.vols.len(), self.times.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if self.correlation.rows() != n || self.correlation.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.correlation.rows() });
        }
        if self.forwards.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidInput("forward prices must be positive"));
        }
        if self.vols.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("volatilities must be positive"));
        }
        if self.times.iter().any(|t| !(*t > 0.0 && *t <= self.expiry * (1.0 + 1e-12))) {
            return Err(Error::InvalidInput("observation times must lie in (0, expiry]"));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::AllZeroWeights);
        }
        if self.strikes.iter().any(|k| !k.is_finite()) || !self.rate.is_finite() {
            return Err(Error::InvalidInput("strikes and rate must be finite"));
        }
        Ok(())
    }
}

/// Correlation matrix with a common off-diagonal value.
pub fn uniform_correlation(n: usize, rho: f64) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
}

/// Correlation matrix from its strict upper triangle in row order.
pub fn correlation_from_upper(n: usize, upper: &[f64]) -> Result<Matrix> {
    if upper.len() != n * (n - 1) / 2 {
        return Err(Error::DimensionMismatch { expected: n * (n - 1) / 2, found: upper.len() });
    }
    let mut m = Matrix::identity(n);
    let mut it = upper.iter();
    for i in 0..n {
        for j in i + 1..n {
            let r = *it.next().expect("length checked");
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    Ok(m)
}

fn forward(spot: f64, rate: f64, dividend: f64, t: f64) -> f64 {
    spot * exp((rate - dividend) * t)
}

/// Two-asset spread with one positive and one negative weight, both observed
/// at expiry.
#[allow(clippy::too_many_arguments)]
pub fn spread(
    weights: [f64; 2],
    spots: [f64; 2],
    dividends: [f64; 2],
    vols: [f64; 2],
    rho: f64,
    expiry: f64,
    rate: f64,
    strikes: &[f64],
) -> Result<PricingProblem> {
    if !(weights[0] * weights[1] < 0.0) {
        return Err(Error::InvalidInput("a spread needs one positive and one negative weight"));
    }
    let p = PricingProblem {
        kind: ProductKind::Spread,
        weights: weights.to_vec(),
        forwards: (0..2).map(|k| forward(spots[k], rate, dividends[k], expiry)).collect(),
        vols: vols.to_vec(),
        times: vec![expiry; 2],
        correlation: uniform_correlation(2, rho),
        rate,
        expiry,
        fixed_leg: 0.0,
        strikes: strikes.to_vec(),
        epsilon: DEFAULT_EPSILON,
    };
    p.validate()?;
    Ok(p)
}

/// Basket with positive weights and a uniform correlation.
#[allow(clippy::too_many_arguments)]
pub fn basket(
    weights: &[f64],
    spots: &[f64],
    dividends: &[f64],
    vols: &[f64],
    expiry: f64,
    rate: f64,
    rho: f64,
    strikes: &[f64],
) -> Result<PricingProblem> {
    let corr = uniform_correlation(weights.len(), rho);
    basket_with_correlation(weights, spots, dividends, vols, &corr, expiry, rate, strikes)
}

#[allow(clippy::too_many_arguments)]
pub fn basket_with_correlation(
    weights: &[f64],
    spots: &[f64],
    dividends: &[f64],
    vols: &[f64],
    correlation: &Matrix,
    expiry: f64,
    rate: f64,
    strikes: &[f64],
) -> Result<PricingProblem> {
    let n = weights.len();
    if spots.len() != n || dividends.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: spots.len().min(dividends.len()) });
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidInput("basket weights must be positive"));
    }
    let p = PricingProblem {
        kind: ProductKind::Basket,
        weights: weights.to_vec(),
        forwards: (0..n).map(|k| forward(spots[k], rate, dividends[k], expiry)).collect(),
        vols: vols.to_vec(),
        times: vec![expiry; n],
        correlation: correlation.clone(),
        rate,
        expiry,
        fixed_leg: 0.0,
        strikes: strikes.to_vec(),
        epsilon: DEFAULT_EPSILON,
    };
    p.validate()?;
    Ok(p)
}

fn asian_from_schedule(
    kind: ProductKind,
    spot: f64,
    vol: f64,
    dividend: f64,
    rate: f64,
    times: &[f64],
    weights: &[f64],
    strikes: &[f64],
) -> Result<PricingProblem> {
    if times.len() != weights.len() || times.is_empty() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: weights.len() });
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidInput("averaging weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("averaging weights must sum to one"));
    }
    if times[0] < 0.0 {
        return Err(Error::InvalidInput("observation times must be non-negative"));
    }
    for i in 1..times.len() {
        if !(times[i] > times[i - 1]) {
            return Err(Error::NonIncreasingTimes { index: i });
        }
    }
    // An observation at t = 0 is a known amount: it shifts the strike.
    let (fixed_leg, start) = if times[0] == 0.0 { (weights[0] * spot, 1) } else { (0.0, 0) };
    let times = &times[start..];
    let weights = &weights[start..];
    if times.is_empty() {
        return Err(Error::InvalidInput("schedule has no random observation"));
    }
    let n = times.len();
    let expiry = times[n - 1];
    let p = PricingProblem {
        kind,
        weights: weights.to_vec(),
        forwards: times.iter().map(|&t| forward(spot, rate, dividend, t)).collect(),
        vols: vec![vol; n],
        times: times.to_vec(),
        correlation: uniform_correlation(n, 1.0),
        rate,
        expiry,
        fixed_leg,
        strikes: strikes.to_vec(),
        epsilon: DEFAULT_EPSILON,
    };
    p.validate()?;
    Ok(p)
}

/// Discretely monitored fixed-strike Asian call on one asset. A leading
/// observation at `t = 0` is allowed and handled as a strike shift.
pub fn asian_discrete(
    spot: f64,
    vol: f64,
    dividend: f64,
    rate: f64,
    times: &[f64],
    weights: &[f64],
    strikes: &[f64],
) -> Result<PricingProblem> {
    asian_from_schedule(ProductKind::AsianDiscrete, spot, vol, dividend, rate, times, weights, strikes)
}

/// Simpson schedule on `[0, T]` with `N = T / dt` even intervals:
/// weights `dt/3T` at both ends, `4dt/3T` at odd and `2dt/3T` at even
/// interior points.
pub fn simpson_schedule(expiry: f64, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = round(expiry / dt);
    if !(expiry > 0.0 && dt > 0.0) || (steps * dt - expiry).abs() > 1e-9 * expiry {
        return Err(Error::InvalidInput("expiry must be a whole multiple of dt"));
    }
    let n = steps as usize;
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidInput("Simpson rule needs an even number of intervals"));
    }
    let step = expiry / n as f64;
    let denom = 3.0 * n as f64;
    let times = (0..=n).map(|k| k as f64 * step).collect();
    let weights = (0..=n)
        .map(|k| {
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c / denom
        })
        .collect();
    Ok((times, weights))
}

/// Continuously monitored Asian call, discretised with Simpson weights.
pub fn asian_continuous(
    spot: f64,
    vol: f64,
    dividend: f64,
    rate: f64,
    expiry: f64,
    dt: f64,
    strikes: &[f64],
) -> Result<PricingProblem> {
    let (times, mut weights) = simpson_schedule(expiry, dt)?;
    // absorb the last-ulp drift so the schedule passes the sum check
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    asian_from_schedule(ProductKind::AsianContinuous, spot, vol, dividend, rate, &times, &weights, strikes)
}

/// Benchmark parameter sets.
pub mod presets {
    use super::*;

    /// Two-asset spread: spots (100, 96), vols (20%, 10%), rho 50%,
    /// dividends 5%, rate 10%, T = 1.
    pub fn s1(strikes: &[f64]) -> PricingProblem {
        spread([1.0, -1.0], [100.0, 96.0], [0.05, 0.05], [0.2, 0.1], 0.5, 1.0, 0.1, strikes)
            .expect("valid preset")
    }

    pub const S1_STRIKES: [f64; 11] = [0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.4, 2.8, 3.2, 3.6, 4.0];

    /// At-the-money spread: spots (200, 100), vols (15%, 30%), K = 100,
    /// no carry, T = 1.
    pub fn s2(rho: f64) -> PricingProblem {
        spread([1.0, -1.0], [200.0, 100.0], [0.0, 0.0], [0.15, 0.3], rho, 1.0, 0.0, &[100.0])
            .expect("valid preset")
    }

    pub const S2_CORRELATIONS: [f64; 10] = [0.9, 0.7, 0.5, 0.3, 0.1, -0.1, -0.3, -0.5, -0.7, -0.9];

    /// Four-asset equal-weight basket, spots 100, T = 5, no carry.
    pub fn b1(vol: f64, rho: f64, strikes: &[f64]) -> PricingProblem {
        basket(&[0.25; 4], &[100.0; 4], &[0.0; 4], &[vol; 4], 5.0, 0.0, rho, strikes).expect("valid preset")
    }

    /// B1 with the first three volatilities set to `vol` and the fourth at 100%.
    pub fn b1_mixed_vol(vol: f64, strikes: &[f64]) -> PricingProblem {
        basket(&[0.25; 4], &[100.0; 4], &[0.0; 4], &[vol, vol, vol, 1.0], 5.0, 0.0, 0.5, strikes)
            .expect("valid preset")
    }

    pub const B1_STRIKES: [f64; 11] = [50.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0, 150.0];
    pub const B1_CORRELATIONS: [f64; 6] = [-0.1, 0.1, 0.3, 0.5, 0.8, 0.95];
    pub const B1_VOLS: [f64; 7] = [0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0];

    pub const B2_WEIGHTS: [f64; 7] = [0.10, 0.15, 0.15, 0.05, 0.20, 0.10, 0.25];
    pub const B2_VOLS: [f64; 7] = [0.1155, 0.2068, 0.1453, 0.1799, 0.1559, 0.1462, 0.1568];
    pub const B2_DIVIDENDS: [f64; 7] = [0.0169, 0.0239, 0.0136, 0.0192, 0.0081, 0.0362, 0.0166];
    /// Strict upper triangle, row by row.
    pub const B2_CORRELATION_UPPER: [f64; 21] = [
        0.35, 0.10, 0.27, 0.04, 0.17, 0.71, //
        0.39, 0.27, 0.50, -0.08, 0.15, //
        0.53, 0.70, -0.23, 0.09, //
        0.46, -0.22, 0.32, //
        -0.29, 0.13, //
        -0.03,
    ];
    pub const B2_STRIKES: [f64; 3] = [80.0, 100.0, 120.0];
    pub const B2_EXPIRIES: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

    /// G-7 index basket, spots 100, rate 6.3%.
    pub fn b2(expiry: f64, strikes: &[f64]) -> PricingProblem {
        let corr = correlation_from_upper(7, &B2_CORRELATION_UPPER).expect("valid preset");
        basket_with_correlation(&B2_WEIGHTS, &[100.0; 7], &B2_DIVIDENDS, &B2_VOLS, &corr, expiry, 0.063, strikes)
            .expect("valid preset")
    }

    fn uniform_schedule(n: usize) -> (Vec<f64>, Vec<f64>) {
        let times = (0..=n).map(|k| k as f64 / n as f64).collect();
        let weights = vec![1.0 / (n as f64 + 1.0); n + 1];
        (times, weights)
    }

    /// Weekly-style average over `t_k = k / 50`, `k = 0..50`, rate 10%.
    pub fn a1(vol: f64, strikes: &[f64]) -> PricingProblem {
        let (t, w) = uniform_schedule(50);
        asian_discrete(100.0, vol, 0.0, 0.1, &t, &w, strikes).expect("valid preset")
    }

    pub const A1_STRIKES: [f64; 5] = [80.0, 90.0, 100.0, 110.0, 120.0];
    pub const A1_VOLS: [f64; 3] = [0.1, 0.3, 0.5];

    /// Average over `t_k = k / N`, `k = 0..N`, vol 17.801%, rate 3.67%.
    pub fn a2(n: usize, strikes: &[f64]) -> PricingProblem {
        let (t, w) = uniform_schedule(n);
        asian_discrete(100.0, 0.17801, 0.0, 0.0367, &t, &w, strikes).expect("valid preset")
    }

    pub const A2_STRIKES: [f64; 3] = [90.0, 100.0, 110.0];
    pub const A2_OBSERVATIONS: [usize; 3] = [12, 50, 250];

    /// `(T, S0, vol, rate)` of the continuously monitored cases; K = 2, q = 0.
    pub const A3_CASES: [(f64, f64, f64, f64); 7] = [
        (1.0, 2.0, 0.10, 0.02),
        (1.0, 2.0, 0.30, 0.18),
        (2.0, 2.0, 0.25, 0.0125),
        (1.0, 1.9, 0.50, 0.05),
        (1.0, 2.0, 0.50, 0.05),
        (1.0, 2.1, 0.50, 0.05),
        (2.0, 2.0, 0.50, 0.05),
    ];
    pub const A3_DT: f64 = 1.0 / 200.0;

    /// Case `1..=7` of the continuous-average set.
    pub fn a3(case: usize) -> PricingProblem {
        let (t, s0, vol, r) = A3_CASES[case - 1];
        asian_continuous(s0, vol, 0.0, r, t, A3_DT, &[2.0]).expect("valid preset")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spread_requires_mixed_signs() {
        assert!(spread([1.0, 1.0], [1.0, 1.0], [0.0; 2], [0.1; 2], 0.0, 1.0, 0.0, &[0.0]).is_err());
        let p = presets::s1(&[0.0]);
        assert_abs_diff_eq!(p.forwards[0], 105.127_109_637_602_4, epsilon = 1e-9);
        assert_abs_diff_eq!(p.forwards[1], 100.922_025_252_098_3, epsilon = 1e-9);
    }

    #[test]
    fn asian_leading_zero_becomes_fixed_leg() {
        let p = presets::a1(0.3, &[100.0]);
        assert_eq!(p.dim(), 50);
        assert_abs_diff_eq!(p.fixed_leg, 100.0 / 51.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.effective_strike(100.0), 100.0 - 100.0 / 51.0, epsilon = 1e-12);
        assert_eq!(p.expiry, 1.0);
        assert_eq!(p.single_path_vol(), Some(0.3));
        let total: f64 = p.weights.iter().sum::<f64>() + 1.0 / 51.0;
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn asian_vanilla_limit() {
        let p = asian_discrete(100.0, 0.2, 0.0, 0.0, &[1.0], &[1.0], &[100.0]).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.fixed_leg, 0.0);
    }

    #[test]
    fn asian_rejects_bad_schedules() {
        assert!(asian_discrete(100.0, 0.2, 0.0, 0.0, &[0.5, 0.5], &[0.5, 0.5], &[1.0]).is_err());
        assert!(asian_discrete(100.0, 0.2, 0.0, 0.0, &[0.5, 1.0], &[0.5, 0.6], &[1.0]).is_err());
        assert!(asian_discrete(100.0, 0.2, 0.0, 0.0, &[0.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn simpson_single_panel() {
        let (t, w) = simpson_schedule(1.0, 0.5).unwrap();
        assert_eq!(t, vec![0.0, 0.5, 1.0]);
        assert_abs_diff_eq!(w[0], 1.0 / 6.0, epsilon = 1e-16);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-16);
        assert_abs_diff_eq!(w[2], 1.0 / 6.0, epsilon = 1e-16);
        assert!(simpson_schedule(1.0, 1.0 / 3.0).is_err());
    }

    #[test]
    fn simpson_continuous_sets() {
        let p = presets::a3(1);
        assert_eq!(p.dim(), 200);
        let p = presets::a3(3);
        assert_eq!(p.dim(), 400);
        let (_, w) = simpson_schedule(2.0, 1.0 / 200.0).unwrap();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn g7_correlation_is_symmetric() {
        let p = presets::b2(1.0, &[100.0]);
        assert_eq!(p.correlation[(0, 6)], 0.71);
        assert_eq!(p.correlation[(6, 5)], -0.03);
        assert_eq!(p.correlation[(2, 5)], -0.23);
        assert_eq!(p.correlation[(5, 2)], -0.23);
    }
}
