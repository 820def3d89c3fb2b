//! JSON problem files.
//!
//! ```json
//! { "type": "spread", "weights": [1, -1], "spots": [100, 96],
//!   "dividends": [0.05, 0.05], "rate": 0.1, "vols": [0.2, 0.1],
//!   "correlation": 0.5, "expiry": 1, "strikes": [0, 2, 4] }
//! ```
//!
//! Spread and basket files give either `spots` (with `rate` and optional
//! `dividends`) or `forwards`; `correlation` is a number (uniform) or a full
//! matrix. Asian files give a single `spot` or per-observation `forwards`.

use std::fs;
use std::path::Path;

use basketquad_core::products::{self, asian_continuous, asian_discrete};
use basketquad_core::{Matrix, PricingProblem};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid problem file at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid problem: {0}")]
    Problem(#[from] basketquad_core::Error),
    #[error("invalid problem: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Correlation {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub enum ProblemSpec {
    Spread(MultiAsset),
    Basket(MultiAsset),
    AsianDiscrete(DiscreteAsian),
    AsianContinuous(ContinuousAsian),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiAsset {
    pub weights: Vec<f64>,
    pub spots: Option<Vec<f64>>,
    pub forwards: Option<Vec<f64>>,
    #[serde(default)]
    pub rate: f64,
    pub dividends: Option<Vec<f64>>,
    pub vols: Vec<f64>,
    pub correlation: Correlation,
    pub expiry: f64,
    pub strikes: Vec<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteAsian {
    pub spot: Option<f64>,
    pub forwards: Option<Vec<f64>>,
    pub vol: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub dividend: f64,
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub strikes: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousAsian {
    pub spot: f64,
    pub vol: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub dividend: f64,
    pub expiry: f64,
    /// Simpson step.
    pub dt: f64,
    pub strikes: Vec<f64>,
}

pub fn parse_str(text: &str) -> Result<ProblemSpec, ProblemFileError> {
    // Internally tagged enums buffer their content and lose the field path,
    // so dispatch on `type` by hand and deserialize the variant directly.
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| schema(".", e))?;
    let obj = value.as_object_mut().ok_or_else(|| schema(".", "expected an object"))?;
    let kind = match obj.remove("type") {
        Some(serde_json::Value::String(s)) => s,
        Some(_) => return Err(schema("type", "expected a string")),
        None => return Err(schema(".", "missing field `type`")),
    };
    Ok(match kind.as_str() {
        "spread" => ProblemSpec::Spread(variant(value)?),
        "basket" => ProblemSpec::Basket(variant(value)?),
        "asian_discrete" => ProblemSpec::AsianDiscrete(variant(value)?),
        "asian_continuous" => ProblemSpec::AsianContinuous(variant(value)?),
        other => {
            return Err(schema(
                "type",
                format!("unknown variant `{other}`, expected one of spread, basket, asian_discrete, asian_continuous"),
            ))
        }
    })
}

fn schema(path: &str, message: impl std::fmt::Display) -> ProblemFileError {
    ProblemFileError::Schema { path: path.to_string(), message: message.to_string() }
}

fn variant<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T, ProblemFileError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(&path, e.into_inner())
    })
}

pub fn load(path: &Path) -> Result<PricingProblem, ProblemFileError> {
    let text = fs::read_to_string(path).map_err(|source| ProblemFileError::Io { path: path.display().to_string(), source })?;
    parse_str(&text)?.build()
}

impl ProblemSpec {
    pub fn build(&self) -> Result<PricingProblem, ProblemFileError> {
        let problem = match self {
            ProblemSpec::Spread(m) => build_multi(m, true)?,
            ProblemSpec::Basket(m) => build_multi(m, false)?,
            ProblemSpec::AsianDiscrete(a) => build_discrete(a)?,
            ProblemSpec::AsianContinuous(a) => {
                asian_continuous(a.spot, a.vol, a.dividend, a.rate, a.expiry, a.dt, &a.strikes)?
            }
        };
        problem.validate()?;
        Ok(problem)
    }
}

fn input(msg: impl Into<String>) -> ProblemFileError {
    ProblemFileError::Input(msg.into())
}

fn correlation_matrix(c: &Correlation, n: usize) -> Result<Matrix, ProblemFileError> {
    match c {
        Correlation::Uniform(rho) => Ok(products::uniform_correlation(n, *rho)),
        Correlation::Matrix(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(input(format!("correlation must be {n} x {n}")));
            }
            Ok(Matrix::from_row_major(n, n, rows.concat())?)
        }
    }
}

/// `(spots, dividends, forwards to keep)`.
type Legs = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

/// Spots or forwards, whichever the file gives. With forwards the spot
/// constructor runs on `forwards` with zero carry and the forwards are kept.
fn spots_or_forwards(
    spots: &Option<Vec<f64>>,
    forwards: &Option<Vec<f64>>,
    dividends: &Option<Vec<f64>>,
    rate: f64,
    n: usize,
) -> Result<Legs, ProblemFileError> {
    match (spots, forwards) {
        (Some(s), None) => {
            let q = dividends.clone().unwrap_or_else(|| vec![0.0; n]);
            Ok((s.clone(), q, None))
        }
        (None, Some(f)) => {
            if dividends.is_some() {
                return Err(input("`dividends` only applies with `spots`"));
            }
            Ok((f.clone(), vec![rate; n], Some(f.clone())))
        }
        _ => Err(input("give exactly one of `spots` and `forwards`")),
    }
}

fn build_multi(m: &MultiAsset, spread: bool) -> Result<PricingProblem, ProblemFileError> {
    let n = m.weights.len();
    let (spots, dividends, forwards) = spots_or_forwards(&m.spots, &m.forwards, &m.dividends, m.rate, n)?;
    for (name, len) in [("spots/forwards", spots.len()), ("dividends", dividends.len()), ("vols", m.vols.len())] {
        if len != n {
            return Err(input(format!("`{name}` has {len} entries for {n} weights")));
        }
    }
    let corr = correlation_matrix(&m.correlation, n)?;
    let mut problem = if spread {
        if n != 2 {
            return Err(input("a spread has exactly two assets"));
        }
        let rho = corr[(0, 1)];
        products::spread(
            [m.weights[0], m.weights[1]],
            [spots[0], spots[1]],
            [dividends[0], dividends[1]],
            [m.vols[0], m.vols[1]],
            rho,
            m.expiry,
            m.rate,
            &m.strikes,
        )?
    } else {
        products::basket_with_correlation(&m.weights, &spots, &dividends, &m.vols, &corr, m.expiry, m.rate, &m.strikes)?
    };
    if let Some(f) = forwards {
        problem.forwards = f;
    }
    if let Some(eps) = m.epsilon {
        problem.epsilon = eps;
    }
    Ok(problem)
}

fn build_discrete(a: &DiscreteAsian) -> Result<PricingProblem, ProblemFileError> {
    match (a.spot, &a.forwards) {
        (Some(spot), None) => Ok(asian_discrete(spot, a.vol, a.dividend, a.rate, &a.times, &a.weights, &a.strikes)?),
        (None, Some(f)) => {
            if f.len() != a.times.len() {
                return Err(input("`forwards` needs one entry per observation time"));
            }
            if a.times.first() == Some(&0.0) {
                return Err(input("with `forwards`, observation times must be positive"));
            }
            let mut problem = asian_discrete(1.0, a.vol, 0.0, 0.0, &a.times, &a.weights, &a.strikes)?;
            problem.forwards = f.clone();
            problem.rate = a.rate;
            Ok(problem)
        }
        _ => Err(input("give exactly one of `spot` and `forwards`")),
    }
}
