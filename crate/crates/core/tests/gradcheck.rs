//! Reverse-mode gradients versus central finite differences, across every
//! estimator kind with frozen sampling plans, for MLP and learnable
//! coupling models.

use ebm_core::bits::{BitBatch, BitVector, Encoding};
use ebm_core::energy::{EnergyModel, IsingEnergy, MlpEnergy};
use ebm_core::rm::{
    batch_loss_and_grads_with_plans, batch_loss_value_with_plans, plans_for_batch, EstimatorKind,
    EstimatorSpec,
};
use ebm_core::sampler::RngStream;
use ebm_core::tensor::finite_diff_grad;

const KINDS: [EstimatorKind; 5] = [
    EstimatorKind::RmFull,
    EstimatorKind::RmGFull,
    EstimatorKind::RmwggisBasic,
    EstimatorKind::RmwggisAdvanced,
    EstimatorKind::Rmwrand,
];

fn random_batch(d: usize, n: usize, rng: &mut RngStream) -> BitBatch {
    let mut b = BitBatch::new(d).unwrap();
    for _ in 0..n {
        b.push(&BitVector::random(d, rng).unwrap()).unwrap();
    }
    b
}

/// Norm-wise relative error of AD gradients against finite differences,
/// maximized over parameter tensors.
fn max_rel_err(
    model: &EnergyModel,
    batch: &BitBatch,
    spec: &EstimatorSpec,
    plans: &[ebm_core::rm::SamplePlan],
    l1: f64,
) -> f64 {
    let result = batch_loss_and_grads_with_plans(model, batch, spec, plans, l1, 1 << 20).unwrap();
    let mut worst: f64 = 0.0;
    for idx in 0..model.params().len() {
        let point = model.params().tensor_at(idx).clone();
        let f = |t: &ebm_core::tensor::Tensor| {
            let mut probe = model.clone();
            *probe.params_mut().tensor_at_mut(idx) = t.clone();
            batch_loss_value_with_plans(&probe, batch, spec, plans, l1)
        };
        let fd = finite_diff_grad(f, &point, 1e-5).unwrap();
        let ad = result.grads.tensor_at(idx);
        let num: f64 = ad
            .data()
            .iter()
            .zip(fd.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = fd.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        // The floor keeps structurally-zero gradients (e.g. the output
        // bias, which cancels in every energy difference) from comparing
        // finite-difference noise against itself. Central-difference noise
        // scales with the loss value, so the floor does too.
        let floor = 1e-5 * (1.0 + result.loss.value.abs());
        worst = worst.max(num / den.max(floor));
    }
    worst
}

#[test]
fn mlp_gradients_match_finite_differences_all_kinds() {
    // 20 trials per kind = 100 total
    let d = 6;
    let mut worst: f64 = 0.0;
    for (k, kind) in KINDS.iter().enumerate() {
        for trial in 0..20 {
            let seed = (k * 100 + trial) as u64;
            let mut init = RngStream::new(seed, 0);
            let model = EnergyModel::Mlp(MlpEnergy::new(d, 8, 2, &mut init).unwrap());
            let mut data_rng = RngStream::new(seed, 9);
            let batch = random_batch(d, 2, &mut data_rng);
            let spec = EstimatorSpec::new(*kind, 3);
            let mut plan_rng = RngStream::new(seed, 1);
            let plans = plans_for_batch(&model, &batch, &spec, &mut plan_rng).unwrap();
            let err = max_rel_err(&model, &batch, &spec, &plans, 0.0);
            assert!(err < 1e-4, "{kind:?} trial {trial}: rel err {err}");
            worst = worst.max(err);
        }
    }
    println!("worst MLP gradient relative error: {worst:.3e}");
}

#[test]
fn coupling_gradients_match_finite_differences() {
    let d = 5;
    for trial in 0..10 {
        let seed = 4000 + trial;
        let mut urng = RngStream::new(seed, 3);
        let mut ising = IsingEnergy::learnable(d, Encoding::PlusMinusOne).unwrap();
        // nonzero parameters keep the l1 subgradient away from its kink
        for v in ising.params_mut().tensor_at_mut(0).data_mut() {
            *v = 0.2 + 0.3 * urng.uniform();
        }
        for v in ising.params_mut().tensor_at_mut(1).data_mut() {
            *v = 0.1 + 0.2 * urng.uniform();
        }
        let model = EnergyModel::Ising(ising);
        let mut data_rng = RngStream::new(seed, 9);
        let batch = random_batch(d, 3, &mut data_rng);
        for kind in [EstimatorKind::RmFull, EstimatorKind::RmwggisAdvanced] {
            let spec = EstimatorSpec::new(kind, 2);
            let mut plan_rng = RngStream::new(seed, 1);
            let plans = plans_for_batch(&model, &batch, &spec, &mut plan_rng).unwrap();
            for l1 in [0.0, 0.05] {
                let err = max_rel_err(&model, &batch, &spec, &plans, l1);
                assert!(err < 1e-4, "{kind:?} l1={l1} trial {trial}: rel err {err}");
            }
        }
    }
}

#[test]
fn gradients_are_bitwise_deterministic() {
    let d = 8;
    let mut init = RngStream::new(5, 0);
    let model = EnergyModel::Mlp(MlpEnergy::new(d, 16, 2, &mut init).unwrap());
    let mut data_rng = RngStream::new(6, 9);
    let batch = random_batch(d, 32, &mut data_rng);
    let spec = EstimatorSpec::new(EstimatorKind::RmwggisAdvanced, 4);
    let run = || {
        let mut rng = RngStream::new(7, 1);
        let plans = plans_for_batch(&model, &batch, &spec, &mut rng).unwrap();
        batch_loss_and_grads_with_plans(&model, &batch, &spec, &plans, 0.0, 1 << 20).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.loss.value.to_bits(), b.loss.value.to_bits());
    for ((_, ta), (_, tb)) in a.grads.iter().zip(b.grads.iter()) {
        for (x, y) in ta.data().iter().zip(tb.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
