//! Gibbs sampler against exhaustively enumerated Boltzmann distributions on
//! small state spaces.

use ebm_core::bits::{BitBatch, BitVector, Encoding};
use ebm_core::energy::{EnergyModel, IsingEnergy, MlpEnergy};
use ebm_core::sampler::{gibbs_sample_set, GibbsConfig, RngStream};

/// Exact Boltzmann probabilities p(x) = exp(-E(x)) / Z over all 2^d states.
fn enumerate_boltzmann(model: &EnergyModel) -> Vec<f64> {
    let d = model.dim();
    assert!(d <= 20);
    let n = 1usize << d;
    let mut batch = BitBatch::with_capacity(d, n).unwrap();
    for idx in 0..n {
        batch.push(&BitVector::from_index(d, idx).unwrap()).unwrap();
    }
    let energies = model.energy_batch(&batch).unwrap();
    let max_neg = energies.iter().map(|e| -e).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| (-e - max_neg).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn total_variation(samples: &BitBatch, probs: &[f64]) -> f64 {
    let mut counts = vec![0usize; probs.len()];
    for r in 0..samples.n() {
        counts[samples.row(r).to_index()] += 1;
    }
    let n = samples.n() as f64;
    0.5 * probs
        .iter()
        .zip(counts.iter())
        .map(|(p, c)| (p - *c as f64 / n).abs())
        .sum::<f64>()
}

#[test]
fn ring_chain_matches_enumerated_distribution() {
    let model =
        EnergyModel::Ising(IsingEnergy::cyclic_ring(10, 0.25, Encoding::PlusMinusOne).unwrap());
    let probs = enumerate_boltzmann(&model);
    let cfg = GibbsConfig {
        chains: 20,
        burn_in_sweeps: 500,
        thin_sweeps: 2,
    };
    let samples = gibbs_sample_set(&model, 200_000, &cfg, 20250811).unwrap();
    let tv = total_variation(&samples, &probs);
    assert!(tv < 0.05, "total variation {tv}");

    // per-site marginals against enumeration
    let mut marg = vec![0.0; 10];
    for (idx, p) in probs.iter().enumerate() {
        for (i, m) in marg.iter_mut().enumerate() {
            if (idx >> i) & 1 == 1 {
                *m += p;
            }
        }
    }
    for i in 0..10 {
        let mut ones = 0usize;
        for r in 0..samples.n() {
            if samples.get(r, i) {
                ones += 1;
            }
        }
        let emp = ones as f64 / samples.n() as f64;
        assert!(
            (emp - marg[i]).abs() < 0.01,
            "site {i}: empirical {emp} vs exact {}",
            marg[i]
        );
    }
}

#[test]
fn mlp_lockstep_chain_matches_enumerated_distribution() {
    let mut rng = RngStream::new(40, 0);
    let model = EnergyModel::Mlp(MlpEnergy::new(8, 8, 1, &mut rng).unwrap());
    let probs = enumerate_boltzmann(&model);
    let cfg = GibbsConfig {
        chains: 16,
        burn_in_sweeps: 300,
        thin_sweeps: 2,
    };
    let samples = gibbs_sample_set(&model, 80_000, &cfg, 99).unwrap();
    let tv = total_variation(&samples, &probs);
    assert!(tv < 0.05, "total variation {tv}");
}
