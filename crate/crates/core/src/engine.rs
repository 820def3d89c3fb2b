//! End-to-end pipeline: factor matrix, node sizes, truncation, grid, kernel.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::factor::{build_factor_matrix, reduce, FactorMatrix, ForwardWeights};
use crate::kernel::{price_strikes, PricingResult};
use crate::products::{PricingProblem, ProductKind};
use crate::quadrature::{node_size_rule, tensor_grid, QuadratureGrid, MAX_ORDER};

pub const FAST_LAMBDA: f64 = 3.0;
pub const CONVERGED_LAMBDA: f64 = 9.0;
/// Node count per factor `2..=5` for Asian problems.
pub const ASIAN_NODES: usize = 3;
pub const ASIAN_KEEP: usize = 5;

/// How node counts for factors `j >= 2` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `M_j = [ |V_j| / |g^T V_1| * lambda + 1 ]`.
    Lambda(f64),
    /// Explicit counts for factors `2, 3, ...`; factors beyond the list are
    /// truncated.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingConfig {
    pub grid: GridSpec,
    pub control_variate: bool,
    /// Force `N'` retained factors.
    pub keep: Option<usize>,
    /// `(j, M_j)` overrides with `j >= 2` the factor index.
    pub overrides: Vec<(usize, usize)>,
}

impl PricingConfig {
    pub fn new(grid: GridSpec) -> Self {
        PricingConfig { grid, control_variate: true, keep: None, overrides: Vec::new() }
    }

    /// Minimal grid: `lambda = 3`, or three nodes on factors 2..5 for Asians.
    pub fn fast(kind: ProductKind) -> Self {
        match kind {
            ProductKind::AsianDiscrete | ProductKind::AsianContinuous => {
                Self::new(GridSpec::Fixed(alloc::vec![ASIAN_NODES; ASIAN_KEEP - 1]))
            }
            _ => Self::new(GridSpec::Lambda(FAST_LAMBDA)),
        }
    }

    pub fn with_lambda(lambda: f64) -> Self {
        Self::new(GridSpec::Lambda(lambda))
    }

    pub fn with_nodes(sizes: &[usize]) -> Self {
        Self::new(GridSpec::Fixed(sizes.to_vec()))
    }

    pub fn control_variate(mut self, on: bool) -> Self {
        self.control_variate = on;
        self
    }

    pub fn keep(mut self, keep: usize) -> Self {
        self.keep = Some(keep);
        self
    }
}

/// Factor matrix and grid ready to price any number of strikes.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Untruncated rotated factor matrix.
    pub full: FactorMatrix,
    /// Retained factors used by the kernel.
    pub factors: FactorMatrix,
    pub weights: ForwardWeights,
    /// Node counts for factors `2..=N'` before trailing ones were dropped.
    pub rule_sizes: Vec<usize>,
    pub grid: QuadratureGrid,
    pub control_variate: bool,
}

impl Prepared {
    pub fn sizes(&self) -> &[usize] {
        self.grid.sizes()
    }

    pub fn price(&self, problem: &PricingProblem, strikes: &[f64]) -> Result<Vec<PricingResult>> {
        price_strikes(problem, &self.factors, &self.grid, strikes, self.control_variate)
    }

    /// Prices the problem's own strikes.
    pub fn price_all(&self, problem: &PricingProblem) -> Result<Vec<PricingResult>> {
        self.price(problem, &problem.strikes)
    }
}

pub fn prepare(problem: &PricingProblem, config: &PricingConfig) -> Result<Prepared> {
    problem.validate()?;
    let (full, weights) = build_factor_matrix(problem)?;
    prepare_with_factors(full, weights, config)
}

/// Same as [`prepare`] for an externally supplied factor matrix.
pub fn prepare_with_factors(
    full: FactorMatrix,
    weights: ForwardWeights,
    config: &PricingConfig,
) -> Result<Prepared> {
    let n = full.factors();
    let mut sizes: Vec<usize> = match &config.grid {
        GridSpec::Lambda(lambda) => {
            if !(*lambda > 0.0) {
                return Err(Error::InvalidInput("lambda must be positive"));
            }
            node_size_rule(&full, &weights.g, *lambda)
        }
        GridSpec::Fixed(list) => list.iter().copied().take(n - 1).collect(),
    };
    for &(j, mj) in &config.overrides {
        if j < 2 || j > n {
            return Err(Error::InvalidInput("node override index must be in 2..=N"));
        }
        if mj == 0 || mj > MAX_ORDER {
            return Err(Error::OrderOutOfRange { order: mj });
        }
        if sizes.len() < j - 1 {
            sizes.resize(j - 1, 1);
        }
        sizes[j - 2] = mj;
    }
    if let Some(keep) = config.keep {
        if keep == 0 || keep > n {
            return Err(Error::InvalidInput("keep must be between 1 and N"));
        }
        sizes.truncate(keep - 1);
    }
    let rule_sizes = sizes.clone();
    while sizes.last() == Some(&1) {
        sizes.pop();
    }
    let factors = reduce(&full, sizes.len() + 1)?;
    let grid = tensor_grid(&sizes)?;
    Ok(Prepared { full, factors, weights, rule_sizes, grid, control_variate: config.control_variate })
}

/// Prices every strike of the problem.
pub fn price(problem: &PricingProblem, config: &PricingConfig) -> Result<Vec<PricingResult>> {
    prepare(problem, config)?.price_all(problem)
}
