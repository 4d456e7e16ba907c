//! Scaled-dot-product attention derived two ways: as the maximum-likelihood
//! mean of Gaussians whose precisions are `exp(α qᵗk_i)`, and as a
//! maximum-entropy distribution over key indices.
//!
//! - [`linalg`]: vectors, inner product, norm, cosine, stable softmax.
//! - [`attention`]: forward attention weights, context vectors and
//!   self-attention with an inner-product counter.
//! - [`gaussian`]: the Gaussian model, its log-likelihood and gradient, the
//!   closed-form estimate and an independent gradient-ascent optimizer.
//! - [`maxent`]: the log-linear formulation.
//! - [`instance`], [`verify`], [`bench`], [`cli`]: file format, checks,
//!   scaling measurements and the command-line front end.

pub mod attention;
pub mod bench;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod instance;
pub mod linalg;
pub mod maxent;
pub mod verify;

pub use attention::{AttentionConfig, KeyValueSequence, SelfAttention, attention_weights, context_vector, self_attention};
pub use error::{Error, Result};
pub use gaussian::{Ascent, GaussianAttentionModel, LikelihoodEvaluation};
pub use linalg::{ProbabilityVector, RealVector, cosine, inner_product, norm, softmax};
pub use maxent::MaxEntAttentionModel;
