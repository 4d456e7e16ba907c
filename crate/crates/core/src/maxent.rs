//! Attention weights as a log-linear (maximum-entropy) conditional
//! distribution over key indices.
//!
//! The label `y` ranges over the key indices and the context is the query.
//! There is one feature per key, `f_i(q, y) = qᵗk_i` when `y == i` and zero
//! otherwise, so `Σ_i λ_i f_i(q, y)` collapses to `λ_y qᵗk_y` and
//!
//! ```text
//! p(y | q) = exp(λ_y qᵗk_y) / Σ_j exp(λ_j qᵗk_j)
//! ```
//!
//! With every `λ_i = α` this is the scaled-dot-product weighting. The
//! weights `λ` are inputs; nothing here fits them.

use crate::error::{Error, Result};
use crate::gaussian::EXPONENT_LIMIT;
use crate::linalg::{self, ProbabilityVector, RealVector};

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntAttentionModel {
    lambdas: Vec<f64>,
    query: RealVector,
    keys: Vec<RealVector>,
    /// `qᵗk_i`
    scores: Vec<f64>,
}

impl MaxEntAttentionModel {
    pub fn new(lambdas: Vec<f64>, query: RealVector, keys: Vec<RealVector>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::EmptySequence);
        }
        if lambdas.len() != keys.len() {
            return Err(Error::DimensionMismatch {
                expected: keys.len(),
                found: lambdas.len(),
            });
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let scores = keys
            .iter()
            .map(|k| linalg::inner_product(&query, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lambdas,
            query,
            keys,
            scores,
        })
    }

    /// Every `λ_i` set to the same value.
    pub fn uniform(lambda: f64, query: RealVector, keys: Vec<RealVector>) -> Result<Self> {
        Self::new(vec![lambda; keys.len()], query, keys)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn query(&self) -> &RealVector {
        &self.query
    }

    pub fn keys(&self) -> &[RealVector] {
        &self.keys
    }

    /// `f_i(q, y)`.
    pub fn feature(&self, i: usize, y: usize) -> Result<f64> {
        self.check(i)?;
        self.check(y)?;
        Ok(if y == i { self.scores[i] } else { 0.0 })
    }

    /// `Σ_i λ_i f_i(q, y)` summed term by term over all features.
    pub fn feature_sum(&self, y: usize) -> Result<f64> {
        self.check(y)?;
        (0..self.len()).try_fold(0.0, |acc, i| Ok(acc + self.lambdas[i] * self.feature(i, y)?))
    }

    /// Collapsed exponent `λ_y qᵗk_y`.
    pub fn logit(&self, y: usize) -> Result<f64> {
        self.check(y)?;
        Ok(self.lambdas[y] * self.scores[y])
    }

    /// `p(y | q)` for every label, via the max-shifted softmax. Logits of any
    /// magnitude are fine as long as they are finite.
    pub fn conditional_probability(&self) -> Result<ProbabilityVector> {
        let logits: Vec<f64> = self
            .lambdas
            .iter()
            .zip(&self.scores)
            .map(|(l, s)| l * s)
            .collect();
        linalg::softmax_slice(&logits)
    }

    /// Partition function `Z = Σ_y exp(Σ_i λ_i f_i(q, y))`, exponentiating the
    /// raw feature sums. Rejects any exponent beyond ±700.
    pub fn partition_function(&self) -> Result<f64> {
        Ok(self.raw_exponentials()?.iter().sum())
    }

    /// `exp(Σ_i λ_i f_i(q, y)) / Z` without shifting; diagnostic cross-check
    /// of [`Self::conditional_probability`].
    pub fn explicit_probability(&self) -> Result<Vec<f64>> {
        let raw = self.raw_exponentials()?;
        let z: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|e| e / z).collect())
    }

    fn raw_exponentials(&self) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|y| {
                let exponent = self.feature_sum(y)?;
                if exponent.is_nan() || exponent.abs() > EXPONENT_LIMIT {
                    return Err(Error::Overflow {
                        index: y,
                        exponent,
                        limit: EXPONENT_LIMIT,
                    });
                }
                Ok(exponent.exp())
            })
            .collect()
    }

    /// Model expectation `E_p[f_i] = p(i | q) qᵗk_i`.
    pub fn expected_feature(&self, i: usize) -> Result<f64> {
        self.check(i)?;
        let p = self.conditional_probability()?;
        Ok((0..self.len())
            .map(|y| p[y] * if y == i { self.scores[i] } else { 0.0 })
            .sum())
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }
}
