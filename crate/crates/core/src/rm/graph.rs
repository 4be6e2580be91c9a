//! Batched loss graphs: one tape per chunk of samples, gradients accumulated
//! across chunks in a fixed order. Chunking bounds peak memory for the full
//! objective at large d, where a batch expands to batch * (d + 1) rows.

use super::{
    plan_from_parts, taylor_delta_from_grad, EstimatorKind,
    EstimatorSpec, LossValue, ProposalDistribution, SamplePlan, TermForm,
};
use crate::bits::BitBatch;
use crate::energy::EnergyModel;
use crate::error::{CoreError, Result};
use crate::sampler::RngStream;
use crate::tensor::{GradRecord, Tape};

/// Row budget per tape chunk. At the default MLP width this keeps a chunk's
/// intermediates within a few hundred MB even at d = 2048.
pub const DEFAULT_MAX_ROWS_PER_CHUNK: usize = 16_384;

/// Loss value plus parameter gradients for one batch.
#[derive(Debug)]
pub struct TrainBatchResult {
    pub loss: LossValue,
    pub grads: GradRecord,
}

/// Draw per-sample plans for a whole batch. Proposal-based kinds evaluate
/// the input gradient once for the full batch; index draws consume the rng
/// sample by sample, so the stream layout matches per-sample drawing.
pub fn plans_for_batch(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
) -> Result<Vec<SamplePlan>> {
    spec.validate(model.dim())?;
    if batch.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    let d = model.dim();
    match spec.kind {
        EstimatorKind::RmwggisBasic | EstimatorKind::RmwggisAdvanced => {
            let grads = model.grad_input(batch)?;
            let mut plans = Vec::with_capacity(batch.n());
            for r in 0..batch.n() {
                let x = batch.row(r);
                let t = taylor_delta_from_grad(&x, &grads.data()[r * d..(r + 1) * d]);
                let logits: Vec<f64> = t.iter().map(|&v| 2.0 * v).collect();
                let proposal = ProposalDistribution::from_logits(x, &logits)?;
                plans.push(plan_from_parts(spec.kind, d, spec.s, Some(&proposal), rng)?);
            }
            Ok(plans)
        }
        _ => (0..batch.n())
            .map(|_| plan_from_parts(spec.kind, d, spec.s, None, rng))
            .collect(),
    }
}

/// Training loss and gradients with freshly drawn plans.
pub fn batch_loss_and_grads(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    rng: &mut RngStream,
    l1_strength: f64,
    max_rows_per_chunk: usize,
) -> Result<TrainBatchResult> {
    let plans = plans_for_batch(model, batch, spec, rng)?;
    batch_loss_and_grads_with_plans(model, batch, spec, &plans, l1_strength, max_rows_per_chunk)
}

/// Training loss and gradients under frozen plans.
///
/// The loss is the mean of per-sample losses, plus `l1_strength * |J|_1`
/// when the model is a learnable coupling model. Proposal probabilities and
/// importance weights enter as constants; gradients flow only through the
/// energies inside the terms.
pub fn batch_loss_and_grads_with_plans(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    plans: &[SamplePlan],
    l1_strength: f64,
    max_rows_per_chunk: usize,
) -> Result<TrainBatchResult> {
    if batch.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    if plans.len() != batch.n() {
        return Err(CoreError::InvalidArgument(
            "one plan per batch sample required".into(),
        ));
    }
    if !model.is_trainable() {
        return Err(CoreError::InvalidArgument(
            "model has no trainable parameters".into(),
        ));
    }
    if l1_strength < 0.0 {
        return Err(CoreError::InvalidArgument(
            "l1 strength must be nonnegative".into(),
        ));
    }
    let group = plans[0].group_size();
    if plans.iter().any(|p| p.group_size() != group) {
        return Err(CoreError::InvalidArgument(
            "all plans in a batch must have the same sample count".into(),
        ));
    }
    let form = match spec.kind {
        EstimatorKind::RmGFull => TermForm::SquaredSigmoid,
        _ => TermForm::SquaredExpDelta,
    };

    let d = model.dim();
    let n = batch.n();
    let samples_per_chunk = (max_rows_per_chunk / group).max(1);
    let mut grads = GradRecord::zeros_like(model.params());
    let mut per_sample = Vec::with_capacity(n);
    let mut clamp_events = 0u64;
    let mut total = 0.0;

    let mut start = 0;
    while start < n {
        let end = (start + samples_per_chunk).min(n);
        let chunk_n = end - start;
        let mut rows = BitBatch::with_capacity(d, chunk_n * group)?;
        let mut weights = Vec::with_capacity(chunk_n * (group - 1));
        for r in start..end {
            let x = batch.row(r);
            rows.push(&x)?;
            for &i in &plans[r].indices {
                if i >= d {
                    return Err(CoreError::InvalidArgument(format!(
                        "flip index {i} out of range for d={d}"
                    )));
                }
                rows.push(&x.flipped(i))?;
            }
            weights.extend_from_slice(&plans[r].weights);
        }

        let mut tape = Tape::new();
        let (energies, handles) = model.tape_energies(&mut tape, &rows, true)?;
        let diffs = tape.anchor_diff(energies, group)?;
        let terms = match form {
            TermForm::SquaredExpDelta => {
                let doubled = tape.scale(diffs, 2.0)?;
                let clamped = tape.clamp(doubled, spec.exponent_clamp)?;
                tape.exp(clamped)?
            }
            TermForm::SquaredSigmoid => {
                let sg = tape.sigmoid(diffs)?;
                tape.square(sg)?
            }
        };
        let chunk_loss = tape.dot_const(terms, weights.clone())?;
        total += tape.value(chunk_loss).item()?;
        clamp_events += tape.clamp_events();

        // per-sample values from the term vector
        let term_values = tape.value(terms).data();
        for (local, _r) in (start..end).enumerate() {
            let lo = local * (group - 1);
            let hi = lo + (group - 1);
            let v: f64 = term_values[lo..hi]
                .iter()
                .zip(&weights[lo..hi])
                .map(|(t, w)| t * w)
                .sum();
            per_sample.push(v);
        }

        let mut tape_grads = tape.backward(chunk_loss)?;
        for (idx, &h) in handles.iter().enumerate() {
            if let Some(g) = tape_grads.take(h) {
                grads.tensor_at_mut(idx).add_assign(&g)?;
            }
        }
        start = end;
    }

    grads.scale_in_place(1.0 / n as f64);
    let mut value = total / n as f64;

    if l1_strength > 0.0 {
        let coupling = match model {
            EnergyModel::Ising(m) if m.is_learnable() => m,
            _ => {
                return Err(CoreError::InvalidArgument(
                    "l1 regularization applies only to learnable coupling models".into(),
                ))
            }
        };
        // |J|_1 over the full matrix = 2 * sum |u| by symmetry; subgradient
        // at zero taken as zero.
        let u = coupling.params().tensor_at(0).data();
        let l1: f64 = u.iter().map(|v| v.abs()).sum::<f64>() * 2.0;
        value += l1_strength * l1;
        let gj = grads.tensor_at_mut(0).data_mut();
        for (g, &uv) in gj.iter_mut().zip(u.iter()) {
            let sign = if uv > 0.0 {
                1.0
            } else if uv < 0.0 {
                -1.0
            } else {
                0.0
            };
            *g += l1_strength * 2.0 * sign;
        }
    }

    Ok(TrainBatchResult {
        loss: LossValue {
            value,
            terms: per_sample,
            clamp_events,
        },
        grads,
    })
}

/// Frozen-plan pure loss used by gradient checks: same plans, same math as
/// the tape path, evaluated without recording.
pub fn batch_loss_value_with_plans(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    plans: &[SamplePlan],
    l1_strength: f64,
) -> Result<f64> {
    let lv = super::batch_loss_with_plans(model, batch, spec, plans)?;
    let mut value = lv.value;
    if l1_strength > 0.0 {
        if let EnergyModel::Ising(m) = model {
            let u = m.params().tensor_at(0).data();
            value += l1_strength * 2.0 * u.iter().map(|v| v.abs()).sum::<f64>();
        }
    }
    Ok(value)
}
