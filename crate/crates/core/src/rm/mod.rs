//! The ratio-matching loss family over single-bit-flip neighborhoods:
//! the full objective, its g-form, the exact variance-optimal proposal,
//! the gradient-guided approximate proposal, importance-sampled estimators
//! (basic and advanced), and the uniform-sampling ablation.
//!
//! Writing delta_i = E(x) - E(x_{-i}):
//! - full loss:      sum_i exp(2 delta_i)
//! - g-form loss:    sum_i sigmoid(delta_i)^2
//! - optimal proposal n*:   probs_i proportional to exp(2 delta_i)
//! - guided proposal:       probs_i proportional to exp(2 t_i) with
//!   t = (2x - 1) .* grad_x E(x), one gradient evaluation, no flip energies
//! - basic estimator:    (1/s) sum_t exp(2 delta_{i_t}) / n_{i_t}
//! - advanced estimator: sum_t exp(2 delta_{i_t})
//! - uniform ablation:   (d/s) sum_t exp(2 delta_{i_t})
//!
//! Exponent arguments (the 2*delta) are clamped to +-exponent_clamp with an
//! event counter; proposals are normalized in log space by max subtraction
//! and never clamp. Proposals and importance weights are constants with
//! respect to the parameters: gradients flow only through the energies
//! inside the terms.

mod graph;

pub use graph::{
    batch_loss_and_grads, batch_loss_and_grads_with_plans, batch_loss_value_with_plans,
    plans_for_batch, TrainBatchResult, DEFAULT_MAX_ROWS_PER_CHUNK,
};

use crate::bits::{BitBatch, BitVector};
use crate::energy::EnergyModel;
use crate::error::{CoreError, Result};
use crate::sampler::{categorical_sample, RngStream};
use crate::tensor::sigmoid;

pub const DEFAULT_EXPONENT_CLAMP: f64 = 30.0;

/// Which objective a training run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Full ratio-matching sum over all d flips.
    RmFull,
    /// Full sum of squared g-form terms.
    RmGFull,
    /// Importance-sampled estimate under the gradient-guided proposal,
    /// with importance weights.
    RmwggisBasic,
    /// Unweighted sum over draws from the gradient-guided proposal.
    RmwggisAdvanced,
    /// Uniformly sampled flips (ablation).
    Rmwrand,
}

impl EstimatorKind {
    pub fn is_sampled(&self) -> bool {
        matches!(
            self,
            EstimatorKind::RmwggisBasic | EstimatorKind::RmwggisAdvanced | EstimatorKind::Rmwrand
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::RmFull => "rm-full",
            EstimatorKind::RmGFull => "rm-g-full",
            EstimatorKind::RmwggisBasic => "rmwggis-basic",
            EstimatorKind::RmwggisAdvanced => "rmwggis-adv",
            EstimatorKind::Rmwrand => "rmwrand",
        }
    }

    pub fn parse(s: &str) -> Result<EstimatorKind> {
        match s {
            "rm-full" => Ok(EstimatorKind::RmFull),
            "rm-g-full" => Ok(EstimatorKind::RmGFull),
            "rmwggis-basic" => Ok(EstimatorKind::RmwggisBasic),
            "rmwggis-adv" | "rmwggis-advanced" => Ok(EstimatorKind::RmwggisAdvanced),
            "rmwrand" => Ok(EstimatorKind::Rmwrand),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown estimator '{other}'"
            ))),
        }
    }

    fn term_form(&self) -> TermForm {
        match self {
            EstimatorKind::RmGFull => TermForm::SquaredSigmoid,
            _ => TermForm::SquaredExpDelta,
        }
    }
}

/// The squared term inside each loss: either [exp(delta)]^2, computed as
/// exp(clamped 2*delta), or [g-form] sigmoid(delta)^2. The importance-sampled
/// machinery works with either form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermForm {
    SquaredExpDelta,
    SquaredSigmoid,
}

/// Objective selector plus sample count for the sampled kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    /// Number of sampled flip terms; ignored by the full kinds.
    pub s: usize,
    pub exponent_clamp: f64,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, s: usize) -> EstimatorSpec {
        EstimatorSpec {
            kind,
            s,
            exponent_clamp: DEFAULT_EXPONENT_CLAMP,
        }
    }

    pub fn with_clamp(mut self, clamp: f64) -> EstimatorSpec {
        self.exponent_clamp = clamp;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.exponent_clamp > 0.0) {
            return Err(CoreError::InvalidArgument(
                "exponent clamp must be positive".into(),
            ));
        }
        if self.kind.is_sampled() && (self.s < 1 || self.s > d) {
            return Err(CoreError::InvalidArgument(format!(
                "sample count s={} must satisfy 1 <= s <= d={d}",
                self.s
            )));
        }
        Ok(())
    }
}

/// Normalized categorical distribution over the d single-flip neighbors of
/// an anchor point.
#[derive(Debug, Clone)]
pub struct ProposalDistribution {
    anchor: BitVector,
    probs: Vec<f64>,
}

impl ProposalDistribution {
    pub fn new(anchor: BitVector, probs: Vec<f64>) -> Result<ProposalDistribution> {
        if probs.len() != anchor.d() {
            return Err(CoreError::DimensionMismatch {
                expected: anchor.d(),
                got: probs.len(),
            });
        }
        let mut total = 0.0;
        for &p in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(CoreError::InvalidArgument(
                    "proposal probabilities must be finite and nonnegative".into(),
                ));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "proposal probabilities sum to {total}"
            )));
        }
        Ok(ProposalDistribution { anchor, probs })
    }

    /// Normalize exp(logits) stably (max subtraction, double pass).
    pub fn from_logits(anchor: BitVector, logits: &[f64]) -> Result<ProposalDistribution> {
        if logits.len() != anchor.d() {
            return Err(CoreError::DimensionMismatch {
                expected: anchor.d(),
                got: logits.len(),
            });
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(CoreError::non_finite("proposal logits"));
        }
        let mut probs: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        // second pass squeezes the sum to 1 within strict tolerance
        let total2: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total2;
        }
        ProposalDistribution::new(anchor, probs)
    }

    pub fn uniform(anchor: BitVector) -> ProposalDistribution {
        let d = anchor.d();
        ProposalDistribution {
            probs: vec![1.0 / d as f64; d],
            anchor,
        }
    }

    pub fn anchor(&self) -> &BitVector {
        &self.anchor
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample_indices(&self, count: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
        categorical_sample(&self.probs, count, rng)
    }
}

/// A loss evaluation. For single-point estimators `terms` holds the weighted
/// summands; for batch losses it holds per-sample loss values.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub terms: Vec<f64>,
    pub clamp_events: u64,
}

/// E(x) - E(x_{-i}) for all d flips.
fn all_deltas(model: &EnergyModel, x: &BitVector) -> Result<Vec<f64>> {
    let e0 = model.energy_one(x)?;
    let ne = model.neighbor_energies(x)?;
    Ok(ne.into_iter().map(|e| e0 - e).collect())
}

/// E(x) - E(x_{-i}) for the given flips, one batched evaluation.
fn sampled_deltas(model: &EnergyModel, x: &BitVector, indices: &[usize]) -> Result<Vec<f64>> {
    let d = model.dim();
    for &i in indices {
        if i >= d {
            return Err(CoreError::InvalidArgument(format!(
                "flip index {i} out of range for d={d}"
            )));
        }
    }
    let mut rows = BitBatch::with_capacity(d, indices.len() + 1)?;
    rows.push(x)?;
    for &i in indices {
        rows.push(&x.flipped(i))?;
    }
    let e = model.energy_batch(&rows)?;
    Ok(e[1..].iter().map(|&ef| e[0] - ef).collect())
}

struct TermEval {
    value: f64,
    clamp_events: u64,
}

fn eval_term(form: TermForm, delta: f64, clamp: f64) -> TermEval {
    match form {
        TermForm::SquaredExpDelta => {
            let arg = 2.0 * delta;
            if arg > clamp {
                TermEval {
                    value: clamp.exp(),
                    clamp_events: 1,
                }
            } else if arg < -clamp {
                TermEval {
                    value: (-clamp).exp(),
                    clamp_events: 1,
                }
            } else {
                TermEval {
                    value: arg.exp(),
                    clamp_events: 0,
                }
            }
        }
        TermForm::SquaredSigmoid => {
            let s = sigmoid(delta);
            TermEval {
                value: s * s,
                clamp_events: 0,
            }
        }
    }
}

fn weighted_loss(deltas: &[f64], weights: &[f64], form: TermForm, clamp: f64) -> LossValue {
    debug_assert_eq!(deltas.len(), weights.len());
    let mut terms = Vec::with_capacity(deltas.len());
    let mut clamp_events = 0;
    let mut value = 0.0;
    for (&delta, &w) in deltas.iter().zip(weights.iter()) {
        let t = eval_term(form, delta, clamp);
        clamp_events += t.clamp_events;
        let contrib = w * t.value;
        terms.push(contrib);
        value += contrib;
    }
    LossValue {
        value,
        terms,
        clamp_events,
    }
}

/// Full ratio-matching objective for one point: sum_i exp(2 delta_i).
pub fn rm_full_loss(model: &EnergyModel, x: &BitVector, clamp: f64) -> Result<LossValue> {
    let deltas = all_deltas(model, x)?;
    Ok(weighted_loss(
        &deltas,
        &vec![1.0; deltas.len()],
        TermForm::SquaredExpDelta,
        clamp,
    ))
}

/// g-form objective: sum_i sigmoid(delta_i)^2. Always within [0, d].
pub fn rm_g_loss(model: &EnergyModel, x: &BitVector) -> Result<LossValue> {
    let deltas = all_deltas(model, x)?;
    Ok(weighted_loss(
        &deltas,
        &vec![1.0; deltas.len()],
        TermForm::SquaredSigmoid,
        DEFAULT_EXPONENT_CLAMP,
    ))
}

/// The variance-optimal proposal: probs_i proportional to exp(2 delta_i).
/// Requires all d flip energies; the oracle the guided proposal approximates.
pub fn exact_optimal_proposal(
    model: &EnergyModel,
    x: &BitVector,
) -> Result<ProposalDistribution> {
    let deltas = all_deltas(model, x)?;
    let logits: Vec<f64> = deltas.iter().map(|&d| 2.0 * d).collect();
    ProposalDistribution::from_logits(x.clone(), &logits)
}

/// First-order approximation of all flip deltas from one input-gradient
/// evaluation: delta_i ~ [(2x - 1) .* grad_x E(x)]_i. Exact whenever E is
/// multilinear in the bits (linear energies, zero-diagonal couplings).
pub fn taylor_delta(model: &EnergyModel, x: &BitVector) -> Result<Vec<f64>> {
    let mut batch = BitBatch::new(x.d())?;
    batch.push(x)?;
    let g = model.grad_input(&batch)?;
    Ok(taylor_delta_from_grad(x, g.data()))
}

pub(crate) fn taylor_delta_from_grad(x: &BitVector, grad_row: &[f64]) -> Vec<f64> {
    (0..x.d())
        .map(|i| {
            let sign = if x.get(i) { 1.0 } else { -1.0 };
            sign * grad_row[i]
        })
        .collect()
}

/// The gradient-guided proposal: probs_i proportional to
/// exp(2 taylor_delta_i). One energy-gradient evaluation, no flip energies.
pub fn gradient_guided_proposal(
    model: &EnergyModel,
    x: &BitVector,
) -> Result<ProposalDistribution> {
    let t = taylor_delta(model, x)?;
    let logits: Vec<f64> = t.iter().map(|&d| 2.0 * d).collect();
    ProposalDistribution::from_logits(x.clone(), &logits)
}

fn basic_weights(proposal: &ProposalDistribution, indices: &[usize]) -> Result<Vec<f64>> {
    let s = indices.len();
    indices
        .iter()
        .map(|&i| {
            let p = proposal.probs()[i];
            if p <= 0.0 {
                Err(CoreError::ZeroMassIndex { index: i })
            } else {
                Ok(1.0 / (s as f64 * p))
            }
        })
        .collect()
}

/// Importance-sampled estimate with weights:
/// (1/s) sum_t exp(2 delta_{i_t}) / n_{i_t}.
/// `indices` must be i.i.d. draws from `proposal`.
pub fn is_estimate_basic(
    model: &EnergyModel,
    x: &BitVector,
    proposal: &ProposalDistribution,
    indices: &[usize],
    clamp: f64,
) -> Result<LossValue> {
    let weights = basic_weights(proposal, indices)?;
    let deltas = sampled_deltas(model, x, indices)?;
    Ok(weighted_loss(
        &deltas,
        &weights,
        TermForm::SquaredExpDelta,
        clamp,
    ))
}

/// Unweighted sum over sampled terms: sum_t exp(2 delta_{i_t}). No 1/s
/// normalization; the constant only rescales gradient magnitude.
pub fn is_estimate_advanced(
    model: &EnergyModel,
    x: &BitVector,
    indices: &[usize],
    clamp: f64,
) -> Result<LossValue> {
    let deltas = sampled_deltas(model, x, indices)?;
    Ok(weighted_loss(
        &deltas,
        &vec![1.0; deltas.len()],
        TermForm::SquaredExpDelta,
        clamp,
    ))
}

/// Uniform-proposal special case: (d/s) sum_t exp(2 delta_{i_t}) with
/// indices uniform over flips.
pub fn rmwrand_estimate(
    model: &EnergyModel,
    x: &BitVector,
    indices: &[usize],
    clamp: f64,
) -> Result<LossValue> {
    let d = model.dim() as f64;
    let s = indices.len() as f64;
    let deltas = sampled_deltas(model, x, indices)?;
    Ok(weighted_loss(
        &deltas,
        &vec![d / s; deltas.len()],
        TermForm::SquaredExpDelta,
        clamp,
    ))
}

/// g-form counterpart of the basic estimator (same machinery, sigmoid
/// terms). Provided for completeness; not used by training defaults.
pub fn is_estimate_basic_g(
    model: &EnergyModel,
    x: &BitVector,
    proposal: &ProposalDistribution,
    indices: &[usize],
) -> Result<LossValue> {
    let weights = basic_weights(proposal, indices)?;
    let deltas = sampled_deltas(model, x, indices)?;
    Ok(weighted_loss(
        &deltas,
        &weights,
        TermForm::SquaredSigmoid,
        DEFAULT_EXPONENT_CLAMP,
    ))
}

/// Flip indices and constant term weights for one training sample.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl SamplePlan {
    pub fn group_size(&self) -> usize {
        self.indices.len() + 1
    }
}

pub(crate) fn plan_from_parts(
    kind: EstimatorKind,
    d: usize,
    s: usize,
    proposal: Option<&ProposalDistribution>,
    rng: &mut RngStream,
) -> Result<SamplePlan> {
    match kind {
        EstimatorKind::RmFull | EstimatorKind::RmGFull => Ok(SamplePlan {
            indices: (0..d).collect(),
            weights: vec![1.0; d],
        }),
        EstimatorKind::RmwggisBasic => {
            let proposal = proposal.expect("basic estimator requires a proposal");
            let indices = proposal.sample_indices(s, rng)?;
            let weights = basic_weights(proposal, &indices)?;
            Ok(SamplePlan { indices, weights })
        }
        EstimatorKind::RmwggisAdvanced => {
            let proposal = proposal.expect("advanced estimator requires a proposal");
            let indices = proposal.sample_indices(s, rng)?;
            Ok(SamplePlan {
                weights: vec![1.0; indices.len()],
                indices,
            })
        }
        EstimatorKind::Rmwrand => {
            let indices: Vec<usize> = (0..s).map(|_| rng.below(d)).collect();
            Ok(SamplePlan {
                weights: vec![d as f64 / s as f64; s],
                indices,
            })
        }
    }
}

/// Draw the sampling plan for a single point under `spec`.
pub fn draw_plan(
    model: &EnergyModel,
    x: &BitVector,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
) -> Result<SamplePlan> {
    spec.validate(model.dim())?;
    let proposal = match spec.kind {
        EstimatorKind::RmwggisBasic | EstimatorKind::RmwggisAdvanced => {
            Some(gradient_guided_proposal(model, x)?)
        }
        _ => None,
    };
    plan_from_parts(spec.kind, model.dim(), spec.s, proposal.as_ref(), rng)
}

/// Loss for one point under a frozen plan.
pub fn estimate_with_plan(
    model: &EnergyModel,
    x: &BitVector,
    plan: &SamplePlan,
    form: TermForm,
    clamp: f64,
) -> Result<LossValue> {
    let deltas = sampled_deltas(model, x, &plan.indices)?;
    Ok(weighted_loss(&deltas, &plan.weights, form, clamp))
}

/// Mean per-sample loss over a batch; fresh proposal and fresh indices per
/// sample for the sampled kinds. `terms` holds per-sample loss values.
pub fn batch_loss(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
) -> Result<LossValue> {
    let plans = plans_for_batch(model, batch, spec, rng)?;
    batch_loss_with_plans(model, batch, spec, &plans)
}

/// As [`batch_loss`] but with the sampling plans frozen by the caller.
pub fn batch_loss_with_plans(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    plans: &[SamplePlan],
) -> Result<LossValue> {
    if batch.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    if plans.len() != batch.n() {
        return Err(CoreError::InvalidArgument(
            "one plan per batch sample required".into(),
        ));
    }
    let form = spec.kind.term_form();
    let mut per_sample = Vec::with_capacity(batch.n());
    let mut clamp_events = 0;
    let mut total = 0.0;
    for (r, plan) in plans.iter().enumerate() {
        let x = batch.row(r);
        let lv = estimate_with_plan(model, &x, plan, form, spec.exponent_clamp)?;
        total += lv.value;
        clamp_events += lv.clamp_events;
        per_sample.push(lv.value);
    }
    Ok(LossValue {
        value: total / batch.n() as f64,
        terms: per_sample,
        clamp_events,
    })
}
