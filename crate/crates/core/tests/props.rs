//! Property-based invariants over the bit, codec, proposal, and metric
//! surfaces.

use ebm_core::bits::{BitBatch, BitVector};
use ebm_core::data::GrayCodec;
use ebm_core::energy::{EnergyModel, MlpEnergy};
use ebm_core::metrics::{hamming_kernel, mmd_linear};
use ebm_core::rm::{exact_optimal_proposal, gradient_guided_proposal};
use ebm_core::sampler::{categorical_sample, RngStream};
use proptest::prelude::*;

fn bitvec_strategy(max_d: usize) -> impl Strategy<Value = BitVector> {
    (1..=max_d, any::<u64>()).prop_map(|(d, seed)| {
        let mut rng = RngStream::new(seed, 0);
        BitVector::random(d, &mut rng).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flip_is_involution(x in bitvec_strategy(130), i in 0usize..130) {
        let i = i % x.d();
        prop_assert_eq!(x.flipped(i).flipped(i), x);
    }

    #[test]
    fn gray_roundtrip_within_bin(k in 1usize..=32, v in -6.0f64..6.0) {
        let codec = GrayCodec::new(k, -4.0, 4.0).unwrap();
        let bits = codec.float_to_gray(v);
        prop_assert_eq!(bits.len(), k);
        let back = codec.gray_to_float(&bits).unwrap();
        let clamped = v.clamp(-4.0, 4.0);
        prop_assert!((back - clamped).abs() <= codec.bin_width() + 1e-12);
    }

    #[test]
    fn categorical_respects_support(seed in any::<u64>(), zero_at in 0usize..6) {
        let mut probs = vec![0.2; 6];
        probs[zero_at] = 0.0;
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() { *p /= total; }
        let total2: f64 = probs.iter().sum();
        for p in probs.iter_mut() { *p /= total2; }
        let mut rng = RngStream::new(seed, 0);
        let picks = categorical_sample(&probs, 200, &mut rng).unwrap();
        prop_assert!(picks.iter().all(|&i| i < 6 && i != zero_at));
    }

    #[test]
    fn kernel_bounds(x in bitvec_strategy(64), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 1);
        let y = BitVector::random(x.d(), &mut rng).unwrap();
        let k = hamming_kernel(&x, &y).unwrap();
        prop_assert!(k >= 0.0 && k <= x.d() as f64);
        prop_assert_eq!(hamming_kernel(&x, &x).unwrap(), x.d() as f64);
    }

    #[test]
    fn mmd_nonnegative_and_symmetric(seed in any::<u64>(), d in 2usize..24, nx in 1usize..12, ny in 1usize..12) {
        let mut rng = RngStream::new(seed, 2);
        let mut x = BitBatch::new(d).unwrap();
        for _ in 0..nx { x.push(&BitVector::random(d, &mut rng).unwrap()).unwrap(); }
        let mut y = BitBatch::new(d).unwrap();
        for _ in 0..ny { y.push(&BitVector::random(d, &mut rng).unwrap()).unwrap(); }
        let a = mmd_linear(&x, &y).unwrap().mmd_sq;
        let b = mmd_linear(&y, &x).unwrap().mmd_sq;
        prop_assert!(a >= -1e-9);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn proposals_are_normalized_with_full_flip_support(seed in any::<u64>(), d in 2usize..12) {
        let mut init = RngStream::new(seed, 0);
        let model = EnergyModel::Mlp(MlpEnergy::new(d, 6, 1, &mut init).unwrap());
        let mut xr = RngStream::new(seed, 1);
        let x = BitVector::random(d, &mut xr).unwrap();
        for p in [exact_optimal_proposal(&model, &x).unwrap(),
                  gradient_guided_proposal(&model, &x).unwrap()] {
            prop_assert_eq!(p.probs().len(), d);
            let sum: f64 = p.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(p.probs().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn neighbor_energies_equal_direct_flips(seed in any::<u64>(), d in 2usize..10) {
        let mut init = RngStream::new(seed, 0);
        let model = EnergyModel::Mlp(MlpEnergy::new(d, 6, 1, &mut init).unwrap());
        let mut xr = RngStream::new(seed, 1);
        let x = BitVector::random(d, &mut xr).unwrap();
        let ne = model.neighbor_energies(&x).unwrap();
        for i in 0..d {
            let direct = model.energy_one(&x.flipped(i)).unwrap();
            prop_assert!((ne[i] - direct).abs() < 1e-10);
        }
    }
}
