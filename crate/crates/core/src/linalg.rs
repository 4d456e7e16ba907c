//! Vector primitives shared by every other module: inner product, norm,
//! cosine and a max-shifted softmax.
//!
//! All arithmetic is plain left-to-right `f64` accumulation.

use std::ops::Index;

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ w_i = 1` for a [`ProbabilityVector`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// A non-empty vector of finite 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySequence);
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

impl Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries)
    }
}

impl TryFrom<&[f64]> for RealVector {
    type Error = Error;

    fn try_from(entries: &[f64]) -> Result<Self> {
        Self::new(entries.to_vec())
    }
}

/// Non-negative weights that sum to one.
///
/// Weights are strictly positive in exact arithmetic; after max-shifting a
/// logit more than ~745 below the maximum underflows to `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates externally supplied weights.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySequence);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0 || *w > 1.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "every weight must lie in [0, 1]".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("weights sum to {total}, not 1"),
            });
        }
        Ok(Self(weights))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

fn check_dims(x: &RealVector, y: &RealVector) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// `Σ x_i y_i`. Exactly symmetric: each product commutes and the
/// accumulation order is fixed.
pub fn inner_product(x: &RealVector, y: &RealVector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(dot(x.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
}

pub fn norm(x: &RealVector) -> f64 {
    dot(x.as_slice(), x.as_slice()).sqrt()
}

/// Cosine of the angle between `x` and `y`. A zero vector is an error
/// rather than a silent `0` or `NaN`.
pub fn cosine(x: &RealVector, y: &RealVector) -> Result<f64> {
    check_dims(x, y)?;
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot(x.as_slice(), y.as_slice()) / (nx * ny))
}

/// `exp(x_i) / Σ_j exp(x_j)` with the maximum logit subtracted first, so
/// logits of magnitude `1e4` and beyond neither overflow nor produce `NaN`.
pub fn softmax(logits: &RealVector) -> ProbabilityVector {
    softmax_slice(logits.as_slice()).expect("RealVector is non-empty and finite")
}

pub(crate) fn softmax_slice(logits: &[f64]) -> Result<ProbabilityVector> {
    if logits.is_empty() {
        return Err(Error::EmptySequence);
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    // The maximum contributes exp(0) = 1, so the sum is at least 1.
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(ProbabilityVector(weights))
}
