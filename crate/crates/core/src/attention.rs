//! Forward scaled-dot-product attention: weights `w_i(q)` over the keys and
//! the weighted sum of the values, for one query or for a full sequence of
//! queries.

use crate::error::{Error, Result};
use crate::linalg::{self, ProbabilityVector, RealVector};

/// Paired keys and values of common dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyValueSequence {
    keys: Vec<RealVector>,
    values: Vec<RealVector>,
}

impl KeyValueSequence {
    pub fn new(keys: Vec<RealVector>, values: Vec<RealVector>) -> Result<Self> {
        if keys.is_empty() || values.is_empty() {
            return Err(Error::EmptySequence);
        }
        if keys.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: keys.len(),
                found: values.len(),
            });
        }
        let d = keys[0].dim();
        for v in keys.iter().chain(&values) {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.dim(),
                });
            }
        }
        Ok(Self { keys, values })
    }

    /// Builds a sequence from row-major `T x d` buffers.
    pub fn from_rows(keys: &[f64], values: &[f64], len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::EmptySequence);
        }
        let n = len * dim;
        for buf in [keys, values] {
            if buf.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: buf.len(),
                });
            }
        }
        let rows = |buf: &[f64]| -> Result<Vec<RealVector>> {
            buf.chunks_exact(dim).map(RealVector::try_from).collect()
        };
        Self::new(rows(keys)?, rows(values)?)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.keys[0].dim()
    }

    pub fn keys(&self) -> &[RealVector] {
        &self.keys
    }

    pub fn values(&self) -> &[RealVector] {
        &self.values
    }
}

/// Scaling factor `α` applied to every query-key inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionConfig {
    alpha: f64,
}

impl AttentionConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must be positive and finite, got {alpha}"),
            });
        }
        Ok(Self { alpha })
    }

    /// `α = 1/sqrt(d)`, the usual scaled-dot-product choice.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            alpha: 1.0 / (dim.max(1) as f64).sqrt(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Result of [`self_attention`]: one context vector per query plus the
/// number of query-key inner products evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention {
    pub rows: Vec<RealVector>,
    pub inner_products: u64,
}

/// Scaled logits `α·qᵗk_i`. The product is formed as `alpha * dot` so that
/// the maximum-entropy path with `λ_i = α` reproduces it bit for bit.
pub(crate) fn scaled_logits(q: &RealVector, keys: &[RealVector], alpha: f64) -> Result<Vec<f64>> {
    if keys.is_empty() {
        return Err(Error::EmptySequence);
    }
    keys.iter()
        .map(|k| linalg::inner_product(q, k).map(|s| alpha * s))
        .collect()
}

pub fn attention_weights(
    q: &RealVector,
    keys: &[RealVector],
    cfg: &AttentionConfig,
) -> Result<ProbabilityVector> {
    let logits = scaled_logits(q, keys, cfg.alpha)?;
    linalg::softmax_slice(&logits)
}

/// `Σ_i w_i(q) v_i`, coordinate by coordinate.
pub fn context_vector(
    q: &RealVector,
    seq: &KeyValueSequence,
    cfg: &AttentionConfig,
) -> Result<RealVector> {
    let weights = attention_weights(q, seq.keys(), cfg)?;
    Ok(weighted_sum(weights.as_slice(), seq.values()))
}

pub(crate) fn weighted_sum(weights: &[f64], values: &[RealVector]) -> RealVector {
    let mut out = vec![0.0; values[0].dim()];
    for (w, v) in weights.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    RealVector::new(out).expect("convex combination of finite values is finite")
}

/// Every query attends to every key. `queries.len()` must equal the
/// sequence length; the returned counter is exactly `T²`.
pub fn self_attention(
    queries: &[RealVector],
    seq: &KeyValueSequence,
    cfg: &AttentionConfig,
) -> Result<SelfAttention> {
    if queries.is_empty() {
        return Err(Error::EmptySequence);
    }
    if queries.len() != seq.len() {
        return Err(Error::DimensionMismatch {
            expected: seq.len(),
            found: queries.len(),
        });
    }
    let mut inner_products = 0u64;
    let mut rows = Vec::with_capacity(queries.len());
    for q in queries {
        rows.push(context_vector(q, seq, cfg)?);
        inner_products += seq.len() as u64;
    }
    Ok(SelfAttention {
        rows,
        inner_products,
    })
}
