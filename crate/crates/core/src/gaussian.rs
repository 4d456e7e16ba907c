//! Attention as a maximum-likelihood estimate.
//!
//! Each value coordinate `v_{i,j}` is modelled as a Gaussian sample whose
//! mean is the unknown coordinate `v_j` and whose variance depends on the
//! timestep through the query and key:
//!
//! ```text
//! θ(i, q)   = exp(α qᵗk_i)
//! σ²(i, q)  = 1 / (β θ(i, q))
//! log g_i   = ½ log(β θ(i, q) / 2π) − ½ β θ(i, q) (v_j − v_{i,j})²
//! ```
//!
//! The log-likelihood sums `log g_i` over timesteps and over the `d`
//! independent coordinates. It is a concave quadratic in `v`, its gradient is
//! `Σ_i −β θ(i, q) (v_j − v_{i,j})`, and setting that to zero gives the
//! precision-weighted mean `Σ_i θ_i v_{i,j} / Σ_i θ_i`, which is exactly the
//! softmax-weighted context vector. β cancels from the estimate.
//!
//! [`GaussianAttentionModel::numerical_mle`] reaches the same point by plain
//! gradient ascent so the closed form can be checked against an optimizer
//! that shares none of its algebra.

use std::f64::consts::TAU;

use crate::attention::{KeyValueSequence, scaled_logits};
use crate::error::{Error, Result};
use crate::linalg::RealVector;

/// Largest `|α qᵗk_i|` accepted; `exp` of anything beyond ~709.8 overflows.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Default gradient tolerance for [`GaussianAttentionModel::numerical_mle`],
/// relative to `β Σ_i θ_i`.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Sufficient-increase constant for the backtracking line search.
const ARMIJO: f64 = 0.5;

/// Log-likelihood and its gradient at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodEvaluation {
    pub log_likelihood: f64,
    pub gradient: RealVector,
}

/// Final iterate of [`GaussianAttentionModel::numerical_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ascent {
    pub estimate: RealVector,
    pub iterations: usize,
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAttentionModel {
    alpha: f64,
    beta: f64,
    query: RealVector,
    seq: KeyValueSequence,
    /// `α qᵗk_i`
    exponents: Vec<f64>,
    /// `θ(i, q)`
    precisions: Vec<f64>,
}

impl GaussianAttentionModel {
    pub fn new(alpha: f64, beta: f64, query: RealVector, seq: KeyValueSequence) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        let exponents = scaled_logits(&query, seq.keys(), alpha)?;
        for (index, &exponent) in exponents.iter().enumerate() {
            if exponent.is_nan() || exponent.abs() > EXPONENT_LIMIT {
                return Err(Error::Overflow {
                    index,
                    exponent,
                    limit: EXPONENT_LIMIT,
                });
            }
        }
        let precisions = exponents.iter().map(|e| e.exp()).collect();
        Ok(Self {
            alpha,
            beta,
            query,
            seq,
            exponents,
            precisions,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn query(&self) -> &RealVector {
        &self.query
    }

    pub fn sequence(&self) -> &KeyValueSequence {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.seq.dim()
    }

    /// Same model with a different β.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        positive("beta", beta)?;
        Ok(Self {
            beta,
            ..self.clone()
        })
    }

    /// `θ(i, q) = exp(α qᵗk_i)`, the inverse variance of timestep `i` up to β.
    pub fn precision(&self, i: usize) -> Result<f64> {
        self.check_timestep(i)?;
        Ok(self.precisions[i])
    }

    /// `σ²(i, q) = 1 / (β θ(i, q))`.
    pub fn variance(&self, i: usize) -> Result<f64> {
        Ok(1.0 / (self.beta * self.precision(i)?))
    }

    /// `Σ_i θ(i, q)`.
    pub fn total_precision(&self) -> f64 {
        self.precisions.iter().sum()
    }

    /// Log-density of observing `v_{i,coord}` when the mean is `v`.
    pub fn log_density(&self, i: usize, coord: usize, v: f64) -> Result<f64> {
        self.check_timestep(i)?;
        if coord >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: coord,
                len: self.dim(),
            });
        }
        if !v.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        Ok(self.log_density_unchecked(i, v - self.seq.values()[i][coord]))
    }

    fn log_density_unchecked(&self, i: usize, residual: f64) -> f64 {
        let scaled = self.beta * self.precisions[i];
        0.5 * (self.exponents[i] + self.beta.ln() - TAU.ln()) - 0.5 * scaled * residual * residual
    }

    pub fn log_likelihood(&self, v: &RealVector) -> Result<f64> {
        self.check_dim(v)?;
        let mut total = 0.0;
        for (j, vj) in v.iter().enumerate() {
            for (i, obs) in self.seq.values().iter().enumerate() {
                total += self.log_density_unchecked(i, vj - obs[j]);
            }
        }
        Ok(total)
    }

    pub fn log_likelihood_gradient(&self, v: &RealVector) -> Result<RealVector> {
        self.check_dim(v)?;
        let mut grad = vec![0.0; self.dim()];
        for (i, obs) in self.seq.values().iter().enumerate() {
            let scaled = self.beta * self.precisions[i];
            for (g, (vj, oj)) in grad.iter_mut().zip(v.iter().zip(obs.iter())) {
                *g -= scaled * (vj - oj);
            }
        }
        if cfg!(feature = "corrupt-gradient") {
            grad.iter_mut().for_each(|g| *g = -*g);
        }
        RealVector::new(grad)
    }

    pub fn evaluate(&self, v: &RealVector) -> Result<LikelihoodEvaluation> {
        Ok(LikelihoodEvaluation {
            log_likelihood: self.log_likelihood(v)?,
            gradient: self.log_likelihood_gradient(v)?,
        })
    }

    /// `L(v + step·dir) − L(v)`, expanded so the normalising constants cancel
    /// symbolically instead of in floating point. Near the optimum the plain
    /// difference of two log-likelihoods is lost in rounding.
    pub fn log_likelihood_change(
        &self,
        v: &RealVector,
        dir: &RealVector,
        step: f64,
    ) -> Result<f64> {
        self.check_dim(v)?;
        self.check_dim(dir)?;
        let mut total = 0.0;
        for (i, obs) in self.seq.values().iter().enumerate() {
            let scaled = self.beta * self.precisions[i];
            for j in 0..self.dim() {
                let move_j = step * dir[j];
                total -= 0.5 * scaled * move_j * (2.0 * (v[j] - obs[j]) + move_j);
            }
        }
        Ok(total)
    }

    /// `Σ_i θ_i v_i / Σ_i θ_i`, the stationary point of the log-likelihood.
    pub fn closed_form_mle(&self) -> RealVector {
        let mut out = vec![0.0; self.dim()];
        for (theta, obs) in self.precisions.iter().zip(self.seq.values()) {
            for (o, x) in out.iter_mut().zip(obs.iter()) {
                *o += theta * x;
            }
        }
        let total = self.total_precision();
        out.iter_mut().for_each(|o| *o /= total);
        RealVector::new(out).expect("weighted mean of finite values is finite")
    }

    /// Gradient ascent on the log-likelihood with a backtracking line search.
    ///
    /// Each iteration starts from twice the previously accepted step and
    /// halves it until the log-likelihood increases by at least
    /// `ARMIJO · step · ‖g‖²`. Stops once `max |g_j| ≤ tol · β Σ θ_i`.
    pub fn numerical_mle(&self, init: &RealVector, tol: f64, max_iters: usize) -> Result<Ascent> {
        self.check_dim(init)?;
        positive("tol", tol)?;
        if max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be at least 1".into(),
            });
        }
        let threshold = tol * self.beta * self.total_precision();
        let mut v = init.clone();
        let mut step: f64 = 0.5;
        for iterations in 0..=max_iters {
            let grad = self.log_likelihood_gradient(&v)?;
            let max_abs_gradient = grad.max_abs();
            if max_abs_gradient <= threshold {
                return Ok(Ascent {
                    estimate: v,
                    iterations,
                    max_abs_gradient,
                });
            }
            if iterations == max_iters {
                return Err(Error::DidNotConverge {
                    iterations,
                    gradient: max_abs_gradient,
                });
            }
            let slope: f64 = grad.iter().map(|g| g * g).sum();
            let mut trial = (2.0 * step).min(f64::MAX);
            loop {
                let gain = self.log_likelihood_change(&v, &grad, trial)?;
                if gain > 0.0 && gain >= ARMIJO * trial * slope {
                    break;
                }
                trial *= 0.5;
                if trial == 0.0 {
                    // No step along the gradient increases L.
                    return Err(Error::DidNotConverge {
                        iterations,
                        gradient: max_abs_gradient,
                    });
                }
            }
            step = trial;
            let next: Vec<f64> = v.iter().zip(grad.iter()).map(|(x, g)| x + step * g).collect();
            v = RealVector::new(next)?;
        }
        unreachable!("loop returns on its last iteration")
    }

    fn check_timestep(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, v: &RealVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        Ok(())
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {x}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{AttentionConfig, context_vector};
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> RealVector {
        RealVector::new(xs.to_vec()).unwrap()
    }

    fn seq(keys: &[&[f64]], values: &[&[f64]]) -> KeyValueSequence {
        KeyValueSequence::new(
            keys.iter().map(|x| v(x)).collect(),
            values.iter().map(|x| v(x)).collect(),
        )
        .unwrap()
    }

    fn model(alpha: f64, beta: f64, q: &[f64], keys: &[&[f64]], values: &[&[f64]]) -> GaussianAttentionModel {
        GaussianAttentionModel::new(alpha, beta, v(q), seq(keys, values)).unwrap()
    }

    #[test]
    fn construction_guards() {
        let s = seq(&[&[1.0]], &[&[0.0]]);
        assert!(GaussianAttentionModel::new(0.0, 1.0, v(&[1.0]), s.clone()).is_err());
        assert!(GaussianAttentionModel::new(1.0, -1.0, v(&[1.0]), s.clone()).is_err());
        assert!(matches!(
            GaussianAttentionModel::new(1.0, 1.0, v(&[1.0, 2.0]), s.clone()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            GaussianAttentionModel::new(1.0, 1.0, v(&[701.0]), s.clone()),
            Err(Error::Overflow { index: 0, .. })
        ));
        assert!(GaussianAttentionModel::new(1.0, 1.0, v(&[700.0]), s).is_ok());
    }

    #[test]
    fn precision_examples() {
        let m = model(1.0, 1.0, &[1.0, 0.0], &[&[0.0, 3.0]], &[&[0.0, 0.0]]);
        assert_eq!(m.precision(0).unwrap(), 1.0);

        let m = model(1e-300, 1.0, &[0.9, -0.4], &[&[0.7, 0.2]], &[&[0.0, 0.0]]);
        assert!((m.precision(0).unwrap() - 1.0).abs() < 1e-12);

        let m = model(0.5, 1.0, &[2.0, 0.0], &[&[3.0, 0.0]], &[&[0.0, 0.0]]);
        assert_eq!(m.precision(0).unwrap(), 20.085536923187668);

        assert_eq!(
            m.precision(1),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        );
    }

    #[test]
    fn precision_is_inverse_variance() {
        let m = model(0.8, 3.0, &[0.5, -1.0], &[&[1.0, 0.2], &[-0.3, 0.9]], &[&[0.0, 0.0], &[1.0, 1.0]]);
        for i in 0..2 {
            let lhs = m.precision(i).unwrap();
            let rhs = 1.0 / (m.variance(i).unwrap() * m.beta());
            assert!((lhs - rhs).abs() <= 1e-15 * lhs);
        }
    }

    #[test]
    fn log_density_examples() {
        // θ = 1 (q ⟂ k) and β = 2π: peak of a unit-normaliser Gaussian.
        let m = model(1.0, TAU, &[1.0, 0.0], &[&[0.0, 1.0]], &[&[0.3, -0.6]]);
        assert_eq!(m.log_density(0, 1, -0.6).unwrap(), 0.0);

        let m = model(0.7, 2.5, &[1.0, 0.5], &[&[0.4, 1.0]], &[&[0.3, -0.6]]);
        let theta = m.precision(0).unwrap();
        let expected = 0.5 * (theta * 2.5 / TAU).ln();
        assert!((m.log_density(0, 0, 0.3).unwrap() - expected).abs() < 1e-15);

        let m = model(1.0, 1.0, &[1.0, 0.0], &[&[0.0, 1.0]], &[&[2.0, 0.0]]);
        let got = m.log_density(0, 0, 3.0).unwrap();
        assert!((got - -1.4189385332046727).abs() < 1e-15, "{got}");
    }

    #[test]
    fn log_density_errors() {
        let m = model(1.0, 1.0, &[1.0], &[&[0.0]], &[&[2.0]]);
        assert!(matches!(m.log_density(1, 0, 0.0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(m.log_density(0, 1, 0.0), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(m.log_density(0, 0, f64::NAN), Err(Error::NonFiniteInput));
    }

    #[test]
    fn log_likelihood_examples() {
        let m = model(0.3, 1.7, &[1.0], &[&[2.0]], &[&[0.4]]);
        let expected = 0.5 * (m.precision(0).unwrap() * 1.7 / TAU).ln();
        assert!((m.log_likelihood(&v(&[0.4])).unwrap() - expected).abs() < 1e-15);

        let one = model(0.3, 1.7, &[1.0], &[&[2.0], &[-1.0]], &[&[0.4], &[0.1]]);
        let two = model(0.3, 1.7, &[1.0, 0.0], &[&[2.0, 5.0], &[-1.0, 5.0]], &[&[0.4, 0.4], &[0.1, 0.1]]);
        let l1 = one.log_likelihood(&v(&[0.25])).unwrap();
        let l2 = two.log_likelihood(&v(&[0.25, 0.25])).unwrap();
        assert_eq!(l2, 2.0 * l1);

        // θ = (1, e): q = 1, keys 0 and 1, α = 1. Value from a 40-digit
        // evaluation of (½log(1/2π) − 1/8) + (½log(e/2π) − e/8).
        let m = model(1.0, 1.0, &[1.0], &[&[0.0], &[1.0]], &[&[0.0], &[1.0]]);
        let got = m.log_likelihood(&v(&[0.5])).unwrap();
        assert!((got - -1.8026622949667261).abs() < 1e-14, "{got}");

        assert!(matches!(
            m.log_likelihood(&v(&[0.5, 0.5])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[cfg(not(feature = "corrupt-gradient"))]
    #[test]
    fn gradient_examples() {
        let m = model(0.9, 2.0, &[1.0, -0.5], &[&[0.3, 0.8]], &[&[1.5, -2.0]]);
        let at = v(&[0.25, 0.75]);
        let g = m.log_likelihood_gradient(&at).unwrap();
        let theta = m.precision(0).unwrap();
        assert_eq!(g[0], -2.0 * theta * (0.25 - 1.5));
        assert_eq!(g[1], -2.0 * theta * (0.75 - -2.0));

        let m = model(0.9, 2.0, &[1.0, -0.5], &[&[0.3, 0.8], &[-1.0, 0.1]], &[&[1.5, -2.0], &[0.5, 0.5]]);
        let g = m.log_likelihood_gradient(&m.closed_form_mle()).unwrap();
        let scale = 2.0 * m.total_precision() * 2.0;
        assert!(g.max_abs() <= 1e-10 * scale);
    }

    #[test]
    fn likelihood_change_matches_direct_difference() {
        let m = model(0.6, 1.3, &[0.2, 0.9], &[&[0.3, 0.8], &[-1.0, 0.1], &[0.5, 0.5]], &[&[1.5, -2.0], &[0.5, 0.5], &[0.0, 1.0]]);
        let at = v(&[0.1, -0.3]);
        let dir = v(&[0.7, 0.2]);
        for step in [1e-3, 0.1, 1.0, 4.0] {
            let moved = v(&[0.1 + step * 0.7, -0.3 + step * 0.2]);
            let direct = m.log_likelihood(&moved).unwrap() - m.log_likelihood(&at).unwrap();
            let change = m.log_likelihood_change(&at, &dir, step).unwrap();
            assert!((direct - change).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_examples() {
        let m = model(2.0, 1.0, &[1.0, 1.0], &[&[0.2, 0.1]], &[&[-3.0, 7.0]]);
        assert_eq!(m.closed_form_mle(), v(&[-3.0, 7.0]));

        let m = model(1e-300, 1.0, &[1.0], &[&[0.2], &[0.9], &[-0.4]], &[&[3.0], &[6.0], &[0.0]]);
        assert!((m.closed_form_mle()[0] - 3.0).abs() < 1e-15);

        let m = model(0.5, 1.0, &[1.0, -1.0], &[&[0.2, 0.1], &[0.9, -0.3]], &[&[1.0, 2.0], &[-1.0, 0.5]]);
        let base = m.closed_form_mle();
        for beta in [0.1, 10.0] {
            let other = m.with_beta(beta).unwrap().closed_form_mle();
            for (a, b) in base.iter().zip(other.iter()) {
                assert!((a - b).abs() <= 1e-15);
            }
        }
    }

    #[cfg(not(feature = "corrupt-gradient"))]
    #[test]
    fn numerical_mle_examples() {
        let m = model(0.5, 1.0, &[1.0, -1.0], &[&[0.2, 0.1], &[0.9, -0.3]], &[&[1.0, 2.0], &[-1.0, 0.5]]);
        let exact = m.closed_form_mle();
        let run = m.numerical_mle(&exact, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS).unwrap();
        assert!(run.iterations <= 1);

        let m = model(0.5, 1.0, &[1.0], &[&[0.3]], &[&[-0.7]]);
        let run = m.numerical_mle(&v(&[25.0]), DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS).unwrap();
        assert!((run.estimate[0] - -0.7).abs() <= 1e-8);
    }

    #[test]
    fn numerical_mle_argument_errors() {
        let m = model(0.5, 1.0, &[1.0], &[&[0.3]], &[&[-0.7]]);
        assert!(m.numerical_mle(&v(&[0.0]), 0.0, 10).is_err());
        assert!(m.numerical_mle(&v(&[0.0]), 1e-10, 0).is_err());
        assert!(m.numerical_mle(&v(&[0.0, 1.0]), 1e-10, 10).is_err());
    }

    #[cfg(not(feature = "corrupt-gradient"))]
    #[test]
    fn numerical_mle_reports_non_convergence() {
        let m = model(0.5, 1.0, &[1.0], &[&[0.3], &[0.1]], &[&[-0.7], &[2.0]]);
        assert!(matches!(
            m.numerical_mle(&v(&[1e6]), 1e-10, 1),
            Err(Error::DidNotConverge { iterations: 1, .. })
        ));
    }

    #[test]
    fn closed_form_is_the_context_vector() {
        let m = model(0.5, 4.0, &[1.0, -1.0], &[&[0.2, 0.1], &[0.9, -0.3], &[-2.0, 1.0]], &[&[1.0, 2.0], &[-1.0, 0.5], &[3.0, 3.0]]);
        let ctx = context_vector(m.query(), m.sequence(), &AttentionConfig::new(0.5).unwrap()).unwrap();
        for (a, b) in m.closed_form_mle().iter().zip(ctx.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    /// Query, keys, values and β.
    type Raw = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, f64);

    fn instance() -> impl Strategy<Value = Raw> {
        (1usize..10, 1usize..5).prop_flat_map(|(t, d)| {
            (
                prop::collection::vec(-1.0..1.0f64, d),
                prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), t),
                prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), t),
                0.1..10.0f64,
            )
        })
    }

    fn build(q: &[f64], k: &[Vec<f64>], vals: &[Vec<f64>], beta: f64) -> GaussianAttentionModel {
        let s = KeyValueSequence::new(
            k.iter().map(|x| v(x)).collect(),
            vals.iter().map(|x| v(x)).collect(),
        )
        .unwrap();
        GaussianAttentionModel::new(1.0 / (q.len() as f64).sqrt(), beta, v(q), s).unwrap()
    }

    proptest! {
        #[test]
        fn closed_form_maximizes((q, k, vals, beta) in instance(),
                                 dir in prop::collection::vec(-1.0..1.0f64, 8),
                                 radius in 1e-3..1.0f64) {
            let m = build(&q, &k, &vals, beta);
            let mle = m.closed_form_mle();
            let d = m.dim();
            let dir = &dir[..d];
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(len > 1e-3);
            let moved = v(&mle.iter().zip(dir).map(|(x, e)| x + radius * e / len).collect::<Vec<_>>());
            prop_assert!(m.log_likelihood(&moved).unwrap() < m.log_likelihood(&mle).unwrap());
        }

        #[test]
        fn changing_beta_changes_likelihood_not_argmax((q, k, vals, beta) in instance()) {
            let m = build(&q, &k, &vals, beta);
            let other = m.with_beta(beta * 3.0).unwrap();
            let at = m.closed_form_mle();
            prop_assert_ne!(m.log_likelihood(&at).unwrap(), other.log_likelihood(&at).unwrap());
            prop_assert_eq!(at, other.closed_form_mle());
        }
    }
}
