//! Instance files and the seeded instance generator.
//!
//! An instance file is JSON with the fields `alpha`, `beta`, `queries`,
//! `keys`, `values` and an optional `lambdas`:
//!
//! ```json
//! { "alpha": 0.5, "beta": 1.0,
//!   "queries": [[1.0, 0.0]], "keys": [[1.0, 0.0], [0.0, 1.0]],
//!   "values": [[1.0, 1.0], [-1.0, -1.0]], "lambdas": [0.5, 0.5] }
//! ```
//!
//! # Generator
//!
//! Random entries come from SplitMix64 with its state initialised to the seed
//! (the reference `splitmix64.c` stream). Each uniform draw maps one 64-bit
//! output `x` to `2 · (x >> 11) · 2⁻⁵³ − 1`, a value in `[−1, 1)`.
//! [`generate`] draws all queries, then all keys, then all values, each in
//! row-major order. [`random_instance`] first draws `T = 1 + x mod 16` and
//! `d = 1 + x mod 8` from the same stream and then proceeds as [`generate`].

use std::path::Path;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{AttentionConfig, KeyValueSequence};
use crate::gaussian::GaussianAttentionModel;
use crate::linalg::RealVector;
use crate::maxent::MaxEntAttentionModel;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read or write instance file: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed instance file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> InstanceError {
    InstanceError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// On-disk form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub alpha: f64,
    pub beta: f64,
    pub queries: Vec<Vec<f64>>,
    pub keys: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, InstanceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("plain data serializes");
        out.push('\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<Instance, InstanceError> {
        for (name, x) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid(name, format!("must be positive and finite, got {x}")));
            }
        }
        if self.keys.is_empty() {
            return Err(invalid("keys", "must contain at least one vector"));
        }
        if self.values.len() != self.keys.len() {
            return Err(invalid(
                "values",
                format!("expected {} vectors to match keys, found {}", self.keys.len(), self.values.len()),
            ));
        }
        if self.queries.is_empty() {
            return Err(invalid("queries", "must contain at least one vector"));
        }
        let dim = self.keys[0].len();
        if dim == 0 {
            return Err(invalid("keys[0]", "vectors must have at least one entry"));
        }
        let rows = |name: &str, rows: &[Vec<f64>]| -> Result<Vec<RealVector>, InstanceError> {
            rows.iter()
                .enumerate()
                .map(|(i, row)| {
                    let field = format!("{name}[{i}]");
                    if row.len() != dim {
                        return Err(invalid(field, format!("expected {dim} entries, found {}", row.len())));
                    }
                    RealVector::new(row.clone()).map_err(|_| invalid(field, "entries must be finite"))
                })
                .collect()
        };
        let queries = rows("queries", &self.queries)?;
        let keys = rows("keys", &self.keys)?;
        let values = rows("values", &self.values)?;
        if let Some(lambdas) = &self.lambdas {
            if lambdas.len() != keys.len() {
                return Err(invalid(
                    "lambdas",
                    format!("expected {} entries, found {}", keys.len(), lambdas.len()),
                ));
            }
            if let Some(i) = lambdas.iter().position(|l| !l.is_finite()) {
                return Err(invalid(format!("lambdas[{i}]"), "must be finite"));
            }
        }
        let seq = KeyValueSequence::new(keys, values).map_err(|e| invalid("keys", e.to_string()))?;
        Ok(Instance {
            config: AttentionConfig::new(self.alpha).expect("alpha checked above"),
            beta: self.beta,
            queries,
            seq,
            lambdas: self.lambdas.clone(),
        })
    }
}

/// A validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub config: AttentionConfig,
    pub beta: f64,
    pub queries: Vec<RealVector>,
    pub seq: KeyValueSequence,
    pub lambdas: Option<Vec<f64>>,
}

impl Instance {
    pub fn alpha(&self) -> f64 {
        self.config.alpha()
    }

    pub fn gaussian_model(&self, query: usize) -> crate::Result<GaussianAttentionModel> {
        GaussianAttentionModel::new(self.alpha(), self.beta, self.queries[query].clone(), self.seq.clone())
    }

    /// Maximum-entropy model for one query, using the instance's `lambdas`
    /// or `λ_i = α` when none are given.
    pub fn maxent_model(&self, query: usize) -> crate::Result<MaxEntAttentionModel> {
        let lambdas = self
            .lambdas
            .clone()
            .unwrap_or_else(|| vec![self.alpha(); self.seq.len()]);
        MaxEntAttentionModel::new(lambdas, self.queries[query].clone(), self.seq.keys().to_vec())
    }
}

/// Uniform draws in `[−1, 1)` from a SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct UniformStream(SplitMix64);

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn next_symmetric(&mut self) -> f64 {
        let unit = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * unit - 1.0
    }

    /// Uniform integer in `1..=n` by reduction modulo `n`.
    pub fn next_count(&mut self, n: u64) -> usize {
        (1 + self.next_u64() % n) as usize
    }

    fn rows(&mut self, t: usize, d: usize) -> Vec<Vec<f64>> {
        (0..t)
            .map(|_| (0..d).map(|_| self.next_symmetric()).collect())
            .collect()
    }
}

/// Instance with `T` queries, keys and values of dimension `d`, `α = 1/√d`
/// and `β = 1`.
pub fn generate(seed: u64, t: usize, d: usize) -> InstanceFile {
    fill(&mut UniformStream::new(seed), t, d)
}

/// Instance with `T ∈ [1, 16]` and `d ∈ [1, 8]` drawn from the stream.
pub fn random_instance(seed: u64) -> InstanceFile {
    let mut stream = UniformStream::new(seed);
    let t = stream.next_count(16);
    let d = stream.next_count(8);
    fill(&mut stream, t, d)
}

fn fill(stream: &mut UniformStream, t: usize, d: usize) -> InstanceFile {
    let queries = stream.rows(t, d);
    let keys = stream.rows(t, d);
    let values = stream.rows(t, d);
    InstanceFile {
        alpha: AttentionConfig::for_dim(d).alpha(),
        beta: 1.0,
        queries,
        keys,
        values,
        lambdas: None,
    }
}
