//! Quadrature pricing of options on linear combinations of correlated
//! geometric Brownian motions: spread, basket and (discrete or continuous)
//! Asian options.
//!
//! The price is written as an expectation of single-factor multi-asset
//! Black-Scholes prices. The single factor is integrated in closed form
//! after a one-dimensional root solve for the exercise boundary, and the
//! remaining factors are summed on a tensor Gauss-Hermite grid. The factor
//! matrix is rotated so that the closed-form direction follows the
//! forward-weighted basket, which keeps the integrand in the other
//! directions smooth and slowly varying.
//!
//! The crate is `no_std` and only needs `alloc`. IO, the command line and
//! reference oracles live in the `basketquad` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
pub mod math;

pub mod engine;
pub mod factor;
pub mod kernel;
pub mod linalg;
pub mod products;
pub mod quadrature;

pub use engine::{prepare, GridSpec, Prepared, PricingConfig};
pub use error::{Error, Result};
pub use factor::{CovarianceMatrix, FactorMatrix, ForwardWeights};
pub use kernel::{BoundaryProblem, PricingResult};
pub use linalg::Matrix;
pub use products::PricingProblem;
pub use quadrature::{GaussHermiteRule, QuadratureGrid};
