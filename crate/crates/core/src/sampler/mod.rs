//! Seedable randomness, categorical sampling from proposals, and Gibbs
//! sampling over any [`EnergyModel`](crate::energy::EnergyModel).

mod gibbs;

pub use gibbs::{gibbs_sample_set, gibbs_sweep, ChainState, GibbsConfig};

use crate::error::{CoreError, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream id partitions so independent concerns never share a stream.
/// ChaCha streams with distinct ids are independent by construction.
pub mod streams {
    /// Parameter initialization.
    pub const INIT: u64 = 0;
    /// Estimator index sampling during training.
    pub const SAMPLER: u64 = 1;
    /// Evaluation-time draws.
    pub const EVAL: u64 = 2;
    /// Epoch shuffling: one stream per epoch, `SHUFFLE_BASE + epoch`.
    pub const SHUFFLE_BASE: u64 = 1 << 32;
    /// Gibbs chains: `GIBBS_BASE + chain_id`.
    pub const GIBBS_BASE: u64 = 2 << 32;
    /// Synthetic data generation.
    pub const DATA: u64 = 3 << 32;
}

/// A seeded, positioned random stream. Same (seed, stream) always yields the
/// same draw sequence; distinct stream ids are independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Position within the keystream, for exact checkpoint resume.
    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn restore(seed: u64, stream: u64, word_pos: u128) -> RngStream {
        let mut s = RngStream::new(seed, stream);
        s.rng.set_word_pos(word_pos);
        s
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        rand::Rng::random_range(&mut self.rng, 0..n)
    }

    /// In-place Fisher-Yates shuffle. Hand-rolled so the draw layout is
    /// stable across dependency upgrades.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Standard normal draw via Box-Muller; one value per call keeps the
/// stream layout simple.
pub fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `count` i.i.d. draws (with replacement) from a categorical distribution.
///
/// Inversion of the cumulative sum with half-open intervals, so an entry
/// with probability zero is never selected.
pub fn categorical_sample(
    probs: &[f64],
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if probs.is_empty() {
        return Err(CoreError::InvalidArgument("empty probability vector".into()));
    }
    let mut total = 0.0;
    for &p in probs {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(CoreError::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        total += p;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::InvalidArgument(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    let last_nonzero = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .ok_or_else(|| CoreError::InvalidArgument("all probabilities are zero".into()))?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u = rng.uniform() * total;
        let mut cum = 0.0;
        let mut chosen = last_nonzero;
        for (i, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            cum += p;
            if u < cum {
                chosen = i;
                break;
            }
        }
        out.push(chosen);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_stream_identical_sequence() {
        let mut a = RngStream::new(123, 7);
        let mut b = RngStream::new(123, 7);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(123, 0);
        let mut b = RngStream::new(123, 1);
        let same = (0..32).filter(|_| a.uniform() == b.uniform()).count();
        assert!(same < 4);
    }

    #[test]
    fn word_pos_restore_resumes_sequence() {
        let mut a = RngStream::new(9, 3);
        for _ in 0..17 {
            a.uniform();
        }
        let pos = a.word_pos();
        let tail: Vec<u64> = (0..20).map(|_| a.uniform().to_bits()).collect();
        let mut b = RngStream::restore(9, 3, pos);
        let tail2: Vec<u64> = (0..20).map(|_| b.uniform().to_bits()).collect();
        assert_eq!(tail, tail2);
    }

    #[test]
    fn degenerate_categorical_always_picks_the_mass() {
        let mut rng = RngStream::new(1, 0);
        let probs = vec![1.0, 0.0, 0.0, 0.0];
        let idx = categorical_sample(&probs, 50, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 0));

        let probs = vec![0.0, 0.0, 1.0];
        let idx = categorical_sample(&probs, 50, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 2));
    }

    #[test]
    fn zero_mass_entries_never_sampled() {
        let mut rng = RngStream::new(2, 0);
        let probs = vec![0.5, 0.0, 0.25, 0.0, 0.25];
        let idx = categorical_sample(&probs, 10_000, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i != 1 && i != 3));
    }

    #[test]
    fn uniform_frequencies_within_four_sigma() {
        let d = 8;
        let n = 1_000_000usize;
        let mut rng = RngStream::new(77, 0);
        let probs = vec![1.0 / d as f64; d];
        let idx = categorical_sample(&probs, n, &mut rng).unwrap();
        let mut counts = vec![0usize; d];
        for i in idx {
            counts[i] += 1;
        }
        let p = 1.0 / d as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            let dev = (c as f64 - n as f64 * p).abs();
            assert!(dev < 4.0 * sigma, "deviation {dev} exceeds 4 sigma {sigma}");
        }
    }

    #[test]
    fn unnormalized_probs_rejected() {
        let mut rng = RngStream::new(3, 0);
        assert!(categorical_sample(&[0.5, 0.6], 1, &mut rng).is_err());
        assert!(categorical_sample(&[0.5, -0.5, 1.0], 1, &mut rng).is_err());
        assert!(categorical_sample(&[], 1, &mut rng).is_err());
    }

    #[test]
    fn fixed_seed_reproducible_indices() {
        let probs = vec![0.25, 0.25, 0.25, 0.25];
        let mut a = RngStream::new(5, 1);
        let mut b = RngStream::new(5, 1);
        let ia = categorical_sample(&probs, 64, &mut a).unwrap();
        let ib = categorical_sample(&probs, 64, &mut b).unwrap();
        assert_eq!(ia, ib);
    }
}
