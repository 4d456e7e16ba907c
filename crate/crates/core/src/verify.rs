//! Mechanical checks of the derivation on seeded random instances.
//!
//! Each instance contributes one Gaussian model per query. For every model
//! the suite checks the analytic gradient against central finite
//! differences, the closed-form estimate against the gradient-ascent
//! optimizer and against the softmax context vector, the β-invariance of the
//! estimate, and the maximum-entropy weights against the attention weights.

use std::fmt;

use crate::attention::{attention_weights, context_vector};
use crate::error::Result;
use crate::gaussian::{DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE, GaussianAttentionModel};
use crate::instance::{Instance, UniformStream, random_instance};
use crate::linalg::RealVector;
use crate::maxent::MaxEntAttentionModel;

pub const FD_STEP: f64 = 1e-6;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const STATIONARITY_TOLERANCE: f64 = 1e-9;
pub const OPTIMIZER_TOLERANCE: f64 = 1e-8;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const BETA_TOLERANCE: f64 = 1e-15;
pub const MAXENT_TOLERANCE: f64 = 1e-15;
pub const BETAS: [f64; 3] = [1e-3, 1.0, 1e3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    /// Analytic gradient vs central finite differences.
    Gradient,
    /// Gradient at the closed form, relative to `β Σθ max|v|`.
    Stationarity,
    /// Gradient ascent vs closed form.
    NumericalMle,
    /// Closed form vs softmax context vector.
    SoftmaxIdentity,
    /// Closed form across β values.
    BetaInvariance,
    /// Maximum-entropy weights with `λ = α` vs attention weights, and
    /// uniform weights at `λ = 0`.
    MaxEntEquivalence,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Gradient,
        Check::Stationarity,
        Check::NumericalMle,
        Check::SoftmaxIdentity,
        Check::BetaInvariance,
        Check::MaxEntEquivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Gradient => "gradient-vs-finite-difference",
            Check::Stationarity => "stationarity-at-closed-form",
            Check::NumericalMle => "closed-form-vs-numerical-mle",
            Check::SoftmaxIdentity => "closed-form-vs-context-vector",
            Check::BetaInvariance => "beta-invariance",
            Check::MaxEntEquivalence => "maxent-equivalence",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Check::Gradient => GRADIENT_TOLERANCE,
            Check::Stationarity => STATIONARITY_TOLERANCE,
            Check::NumericalMle => OPTIMIZER_TOLERANCE,
            Check::SoftmaxIdentity => IDENTITY_TOLERANCE,
            Check::BetaInvariance => BETA_TOLERANCE,
            Check::MaxEntEquivalence => MAXENT_TOLERANCE,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a measurement was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Case {
    pub instance: usize,
    pub seed: u64,
    pub query: usize,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instance {} (seed {}), query {}", self.instance, self.seed, self.query)
    }
}

/// Worst error seen for one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub check: Check,
    pub worst_error: f64,
    pub worst_case: Option<Case>,
    /// First failure, with a description.
    pub failure: Option<(Case, String)>,
    pub measurements: usize,
}

impl CheckResult {
    fn new(check: Check) -> Self {
        Self {
            check,
            worst_error: 0.0,
            worst_case: None,
            failure: None,
            measurements: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.measurements > 0
    }

    fn record(&mut self, case: Case, outcome: Result<f64>) {
        self.measurements += 1;
        let (error, note) = match outcome {
            Ok(e) if e.is_nan() => (f64::INFINITY, "error is NaN".to_string()),
            Ok(e) => (e, format!("error {e:.3e} exceeds {:.0e}", self.check.tolerance())),
            Err(e) => (f64::INFINITY, e.to_string()),
        };
        if error > self.worst_error || self.worst_case.is_none() {
            self.worst_error = error;
            self.worst_case = Some(case);
        }
        if error > self.check.tolerance() && self.failure.is_none() {
            self.failure = Some((case, note));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub results: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(CheckResult::passed)
    }

    pub fn result(&self, check: Check) -> &CheckResult {
        self.results
            .iter()
            .find(|r| r.check == check)
            .expect("every check has a result")
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed())
    }

    /// Fixed-width table, one row per check.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<32} {:>6} {:>12} {:>10} {:>8}\n",
            "check", "n", "worst", "tolerance", "result"
        );
        for r in &self.results {
            out += &format!(
                "{:<32} {:>6} {:>12.3e} {:>10.0e} {:>8}\n",
                r.check.name(),
                r.measurements,
                r.worst_error,
                r.check.tolerance(),
                if r.passed() { "PASS" } else { "FAIL" }
            );
        }
        out
    }
}

pub type GradientFn = dyn Fn(&GaussianAttentionModel, &RealVector) -> Result<RealVector>;

/// Runs the checks. The gradient used by [`Check::Gradient`] is pluggable
/// so a deliberately broken gradient can be shown to fail.
pub struct Verifier<'a> {
    gradient: &'a GradientFn,
    results: Vec<CheckResult>,
}

fn model_gradient(m: &GaussianAttentionModel, v: &RealVector) -> Result<RealVector> {
    m.log_likelihood_gradient(v)
}

impl Default for Verifier<'_> {
    fn default() -> Self {
        Self::with_gradient(&model_gradient)
    }
}

impl<'a> Verifier<'a> {
    pub fn with_gradient(gradient: &'a GradientFn) -> Self {
        Self {
            gradient,
            results: Check::ALL.iter().map(|&c| CheckResult::new(c)).collect(),
        }
    }

    fn record(&mut self, check: Check, case: Case, outcome: Result<f64>) {
        let slot = self
            .results
            .iter_mut()
            .find(|r| r.check == check)
            .expect("every check has a slot");
        slot.record(case, outcome);
    }

    /// Checks every query of `inst`. `instance` and `seed` only label the
    /// measurements.
    pub fn check_instance(&mut self, inst: &Instance, instance: usize, seed: u64) {
        for query in 0..inst.queries.len() {
            let case = Case {
                instance,
                seed,
                query,
            };
            let model = match inst.gaussian_model(query) {
                Ok(m) => m,
                Err(e) => {
                    for check in Check::ALL {
                        self.record(check, case, Err(e.clone()));
                    }
                    continue;
                }
            };
            let probe = probe_point(seed, query, model.dim());
            let outcome = gradient_error(&model, &probe, self.gradient);
            self.record(Check::Gradient, case, outcome);
            self.record(Check::Stationarity, case, stationarity_error(&model));
            self.record(Check::NumericalMle, case, optimizer_error(&model));
            self.record(Check::SoftmaxIdentity, case, identity_error(&model));
            self.record(Check::BetaInvariance, case, beta_drift(&model));
            self.record(Check::MaxEntEquivalence, case, maxent_error(inst, query));
        }
    }

    pub fn finish(self) -> VerifyReport {
        VerifyReport {
            results: self.results,
        }
    }
}

/// Full suite over `instances` random instances; instance `n` is generated
/// from seed `seed + n` (wrapping).
pub fn run(seed: u64, instances: usize) -> VerifyReport {
    run_with(seed, instances, Verifier::default())
}

pub fn run_with(seed: u64, instances: usize, mut verifier: Verifier<'_>) -> VerifyReport {
    for n in 0..instances {
        let instance_seed = seed.wrapping_add(n as u64);
        let inst = random_instance(instance_seed)
            .validate()
            .expect("generated instances are valid");
        verifier.check_instance(&inst, n, instance_seed);
    }
    verifier.finish()
}

/// Point at which the gradient is probed: uniform in `[−2, 2)` per
/// coordinate, from the stream seeded with `!seed + query`.
pub fn probe_point(seed: u64, query: usize, dim: usize) -> RealVector {
    let mut stream = UniformStream::new((!seed).wrapping_add(query as u64));
    RealVector::new((0..dim).map(|_| 2.0 * stream.next_symmetric()).collect())
        .expect("finite draws")
}

/// `max_j |g_j − fd_j| / max(1, |g_j|, |fd_j|)` with central differences.
pub fn gradient_error(
    model: &GaussianAttentionModel,
    at: &RealVector,
    gradient: &GradientFn,
) -> Result<f64> {
    let analytic = gradient(model, at)?;
    let mut worst = 0.0_f64;
    for j in 0..at.dim() {
        let shifted = |delta: f64| {
            let mut p = at.clone().into_vec();
            p[j] += delta;
            RealVector::new(p)
        };
        let up = model.log_likelihood(&shifted(FD_STEP)?)?;
        let down = model.log_likelihood(&shifted(-FD_STEP)?)?;
        let fd = (up - down) / (2.0 * FD_STEP);
        let a = analytic[j];
        worst = worst.max((a - fd).abs() / 1f64.max(a.abs()).max(fd.abs()));
    }
    Ok(worst)
}

/// `max|∇L(v̂)| / (β Σθ max|v_{i,j}|)`, with the `1e-12` absolute floor of
/// the stationarity bound folded into the denominator.
pub fn stationarity_error(model: &GaussianAttentionModel) -> Result<f64> {
    let grad = model.log_likelihood_gradient(&model.closed_form_mle())?;
    let value_scale = model
        .sequence()
        .values()
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.max_abs()));
    let scale = model.beta() * model.total_precision() * value_scale;
    // |g| ≤ tol·scale + 1e-12  ⇔  |g| / (scale + 1e-12/tol) ≤ tol
    Ok(grad.max_abs() / (scale + 1e-12 / STATIONARITY_TOLERANCE))
}

pub fn optimizer_error(model: &GaussianAttentionModel) -> Result<f64> {
    let init = RealVector::zeros(model.dim())?;
    let ascent = model.numerical_mle(&init, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)?;
    Ok(max_abs_diff(&ascent.estimate, &model.closed_form_mle()))
}

pub fn identity_error(model: &GaussianAttentionModel) -> Result<f64> {
    let cfg = crate::attention::AttentionConfig::new(model.alpha())?;
    let ctx = context_vector(model.query(), model.sequence(), &cfg)?;
    Ok(max_abs_diff(&ctx, &model.closed_form_mle()))
}

pub fn beta_drift(model: &GaussianAttentionModel) -> Result<f64> {
    let estimates = BETAS
        .iter()
        .map(|&b| Ok(model.with_beta(b)?.closed_form_mle()))
        .collect::<Result<Vec<_>>>()?;
    Ok(estimates
        .iter()
        .map(|e| max_abs_diff(e, &estimates[0]))
        .fold(0.0, f64::max))
}

pub fn maxent_error(inst: &Instance, query: usize) -> Result<f64> {
    let q = &inst.queries[query];
    let keys = inst.seq.keys().to_vec();
    let weights = attention_weights(q, &keys, &inst.config)?;
    let matched = MaxEntAttentionModel::uniform(inst.alpha(), q.clone(), keys.clone())?
        .conditional_probability()?;
    let flat = MaxEntAttentionModel::uniform(0.0, q.clone(), keys)?.conditional_probability()?;
    let uniform = 1.0 / flat.len() as f64;
    let equivalence = matched
        .iter()
        .zip(weights.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let flatness = flat.iter().map(|p| (p - uniform).abs()).fold(0.0, f64::max);
    Ok(equivalence.max(flatness))
}

fn max_abs_diff(a: &RealVector, b: &RealVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
