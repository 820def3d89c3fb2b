//! Independent references for the quadrature pricer: seeded Monte Carlo,
//! closed forms, brute-force tensor quadrature on the raw payoff and an
//! adaptive one-dimensional integral for two assets.
//!
//! All prices are forward values of calls unless stated otherwise.

use basketquad_core::factor::{build_covariance, cholesky_factor, forward_weights};
use basketquad_core::math::{norm_cdf, norm_pdf};
use basketquad_core::products::basket;
use basketquad_core::quadrature::gauss_hermite_reference;
use basketquad_core::{engine, Error, FactorMatrix, Matrix, PricingConfig, PricingProblem, Result};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

pub const MIN_PATHS: u64 = 10_000;
pub const MAX_FULL_GRID_DIM: usize = 3;
pub const MAX_FULL_GRID_NODES: usize = 200;

/// Antithetic pairs per batch. Batch `b` draws from ChaCha20 stream `b` of
/// the seed, so results do not depend on the thread count.
const BATCH_PAIRS: u64 = 1 << 14;

/// Half-width of the integration range (in standard deviations) for
/// [`two_asset_reference`].
const SECTION_RANGE: f64 = 16.0;

/// Black-Scholes forward value of a call. `k <= 0` gives `f - k`.
pub fn bsm_single(f: f64, k: f64, total_vol: f64) -> f64 {
    if k <= 0.0 {
        return f - k;
    }
    if total_vol <= 0.0 {
        return (f - k).max(0.0);
    }
    let d1 = ((f / k).ln() + 0.5 * total_vol * total_vol) / total_vol;
    f * norm_cdf(d1) - k * norm_cdf(d1 - total_vol)
}

/// Exchange option `(S1 - S2)^+` on forwards, vols given per unit time.
pub fn margrabe(f1: f64, f2: f64, v1: f64, v2: f64, rho: f64, t: f64) -> f64 {
    let s = ((v1 * v1 + v2 * v2 - 2.0 * rho * v1 * v2).max(0.0) * t).sqrt();
    bsm_single(f1, f2, s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub strike: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Antithetic Monte Carlo over every strike of the problem. `paths` counts
/// both members of each antithetic pair; the standard error is taken over
/// pair averages. Deterministic for a given `(seed, paths)`.
pub fn mc_price(problem: &PricingProblem, paths: u64, seed: u64) -> Result<Vec<McEstimate>> {
    if paths < MIN_PATHS {
        return Err(Error::InvalidInput("mc_price needs at least 10^4 paths"));
    }
    problem.validate()?;
    let sampler = Sampler::new(problem)?;
    let strikes: Vec<f64> = problem.strikes.iter().map(|&k| problem.effective_strike(k)).collect();
    let pairs = paths.div_ceil(2);
    let batches = pairs.div_ceil(BATCH_PAIRS);
    let partial: Vec<Vec<(f64, f64)>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH_PAIRS.min(pairs - b * BATCH_PAIRS);
            sampler.batch(seed, b, count, &strikes)
        })
        .collect();

    let mut sum = vec![0.0; strikes.len()];
    let mut sq = vec![0.0; strikes.len()];
    for batch in &partial {
        for (j, (s, q)) in batch.iter().enumerate() {
            sum[j] += s;
            sq[j] += q;
        }
    }
    let n = pairs as f64;
    Ok(problem
        .strikes
        .iter()
        .enumerate()
        .map(|(j, &strike)| {
            let mean = sum[j] / n;
            let var = ((sq[j] / n - mean * mean) * n / (n - 1.0)).max(0.0);
            McEstimate { strike, estimate: mean, stderr: (var / n).sqrt() }
        })
        .collect())
}

enum Loading {
    /// Lower-triangular square root of the covariance.
    Cholesky(Matrix),
    /// One Brownian path: standard deviation of each increment.
    Walk(Vec<f64>),
}

struct Sampler {
    /// `w_k F_k exp(-Sigma_kk / 2)`
    scale: Vec<f64>,
    loading: Loading,
}

impl Sampler {
    fn new(problem: &PricingProblem) -> Result<Self> {
        let sigma = build_covariance(problem)?;
        let variances = sigma.variances();
        let scale = (0..problem.dim())
            .map(|k| problem.weights[k] * problem.forwards[k] * (-0.5 * variances[k]).exp())
            .collect();
        let loading = match problem.single_path_vol() {
            Some(vol) => {
                let mut prev = 0.0;
                Loading::Walk(
                    problem
                        .times
                        .iter()
                        .map(|&t| {
                            let sd = vol * (t - prev).sqrt();
                            prev = t;
                            sd
                        })
                        .collect(),
                )
            }
            None => Loading::Cholesky(cholesky_factor(problem, &sigma)?),
        };
        Ok(Sampler { scale, loading })
    }

    fn correlate(&self, z: &[f64], x: &mut [f64]) {
        match &self.loading {
            Loading::Cholesky(c) => {
                for (k, xk) in x.iter_mut().enumerate() {
                    *xk = c.row(k)[..=k].iter().zip(z).map(|(a, b)| a * b).sum();
                }
            }
            Loading::Walk(sd) => {
                let mut acc = 0.0;
                for ((xk, s), zk) in x.iter_mut().zip(sd).zip(z) {
                    acc += s * zk;
                    *xk = acc;
                }
            }
        }
    }

    /// Per-strike `(sum, sum of squares)` of antithetic pair averages.
    fn batch(&self, seed: u64, stream: u64, pairs: u64, strikes: &[f64]) -> Vec<(f64, f64)> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let normal = Normal::standard();
        let dim = self.scale.len();
        let mut z = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut out = vec![(0.0, 0.0); strikes.len()];
        for _ in 0..pairs {
            for zk in z.iter_mut() {
                *zk = normal.inverse_cdf(rng.sample(Open01));
            }
            self.correlate(&z, &mut x);
            let (mut up, mut down) = (0.0, 0.0);
            for (a, xk) in self.scale.iter().zip(&x) {
                let e = xk.exp();
                up += a * e;
                down += a / e;
            }
            for ((s, q), k) in out.iter_mut().zip(strikes) {
                let pay = 0.5 * ((up - k).max(0.0) + (down - k).max(0.0));
                *s += pay;
                *q += pay * pay;
            }
        }
        out
    }
}

/// Tensor Gauss-Hermite rule over all dimensions of the Cholesky factor,
/// applied directly to the payoff with no closed-form step.
pub fn full_grid_price(problem: &PricingProblem, nodes_per_dim: usize, strike: f64) -> Result<f64> {
    problem.validate()?;
    let sigma = build_covariance(problem)?;
    let c = cholesky_factor(problem, &sigma)?;
    full_grid_with_factor(problem, &c, nodes_per_dim, strike)
}

/// [`full_grid_price`] with any square root `l` of the covariance.
pub fn full_grid_with_factor(problem: &PricingProblem, l: &Matrix, nodes_per_dim: usize, strike: f64) -> Result<f64> {
    let n = problem.dim();
    if n > MAX_FULL_GRID_DIM {
        return Err(Error::InvalidInput("full-grid quadrature supports at most three assets"));
    }
    if l.rows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: l.rows() });
    }
    if nodes_per_dim == 0 || nodes_per_dim > MAX_FULL_GRID_NODES {
        return Err(Error::OrderOutOfRange { order: nodes_per_dim });
    }
    let rule = gauss_hermite_reference(nodes_per_dim)?;
    let (z, h) = (rule.nodes(), rule.weights());
    let m = l.cols();
    let scale: Vec<f64> = (0..n)
        .map(|k| {
            let var = l.row_norm(k).powi(2);
            problem.weights[k] * problem.forwards[k] * (-0.5 * var).exp()
        })
        .collect();
    let k_eff = problem.effective_strike(strike);
    let mut idx = vec![0usize; m];
    let total = nodes_per_dim.pow(m as u32);
    let mut point = vec![0.0; m];
    let mut sum = 0.0;
    for _ in 0..total {
        let mut weight = 1.0;
        for (p, &i) in point.iter_mut().zip(&idx) {
            *p = z[i];
            weight *= h[i];
        }
        let basket: f64 = (0..n).map(|k| scale[k] * l.row(k).iter().zip(&point).map(|(a, b)| a * b).sum::<f64>().exp()).sum();
        sum += weight * (basket - k_eff).max(0.0);
        for d in (0..m).rev() {
            idx[d] += 1;
            if idx[d] < nodes_per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(sum)
}

/// Two-asset call by conditioning on one asset and integrating the
/// Black-Scholes value of the other adaptively. Accurate to about 1e-10 and
/// independent of the factor construction used by the pricer.
pub fn two_asset_reference(problem: &PricingProblem, strike: f64) -> Result<f64> {
    problem.validate()?;
    if problem.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: problem.dim() });
    }
    let sigma = build_covariance(problem)?;
    let a = match problem.weights.iter().position(|&w| w > 0.0) {
        Some(a) => a,
        None => return Err(Error::InvalidInput("two-asset reference needs a positive weight")),
    };
    let b = 1 - a;
    let (saa, sbb, sab) = (sigma[(a, a)], sigma[(b, b)], sigma[(a, b)]);
    let sb = sbb.sqrt();
    let beta = sab / sb;
    let resid = saa - beta * beta;
    if resid <= 1e-12 * saa {
        return Err(Error::InvalidInput("two-asset reference needs |rho| < 1"));
    }
    let v = resid.sqrt();
    let (wa, fa) = (problem.weights[a], problem.forwards[a]);
    let (wb, fb) = (problem.weights[b], problem.forwards[b]);
    let k = problem.effective_strike(strike);
    let section = |u: f64| {
        let fa_u = fa * (beta * u - 0.5 * beta * beta).exp();
        let k_u = k - wb * fb * (sb * u - 0.5 * sbb).exp();
        wa * bsm_single(fa_u, k_u / wa, v) * norm_pdf(u)
    };
    // Unit panels keep each tanh-sinh call within its refinement limit; an
    // extra cut goes where the conditional strike changes sign.
    let panels = (2.0 * SECTION_RANGE) as usize;
    let mut cuts: Vec<f64> = (0..=panels).map(|i| -SECTION_RANGE + i as f64).collect();
    let ratio = k / (wb * fb);
    if ratio > 0.0 {
        let u = (ratio.ln() + 0.5 * sbb) / sb;
        if u.abs() < SECTION_RANGE {
            cuts.push(u);
            cuts.sort_by(f64::total_cmp);
        }
    }
    Ok(cuts.windows(2).map(|c| quadrature::integrate(section, c[0], c[1], 1e-14).integral).sum())
}

/// Two independent unit-variance assets with forwards `e^{1/2}`, so the
/// basket is `e^{x1} + e^{x2}` for standard normals `x1, x2`.
pub fn unit_example(strikes: &[f64]) -> PricingProblem {
    let s = 0.5_f64.exp();
    basket(&[1.0, 1.0], &[s, s], &[0.0, 0.0], &[1.0, 1.0], 1.0, 0.0, 0.0, strikes).expect("valid example")
}

/// Quadrature put using the Cholesky factor unrotated: the first asset is
/// integrated in closed form and the second on `nodes` Gauss-Hermite points.
pub fn unrotated_section_put(problem: &PricingProblem, nodes: usize, strike: f64) -> Result<f64> {
    let sigma = build_covariance(problem)?;
    let c = cholesky_factor(problem, &sigma)?;
    let weights = forward_weights(problem)?;
    let config = PricingConfig::with_nodes(&[nodes]).control_variate(false);
    let prepared = engine::prepare_with_factors(FactorMatrix::from_matrix(c), weights, &config)?;
    Ok(prepared.price(problem, &[strike])?[0].put)
}

/// Put by parity from a call forward value.
pub fn put_from_call(problem: &PricingProblem, call: f64, strike: f64) -> f64 {
    call - (problem.basket_forward() - strike)
}
