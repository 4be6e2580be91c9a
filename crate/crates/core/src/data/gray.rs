use crate::error::{CoreError, Result};

/// Quantizer from a real interval [lo, hi] to k-bit binary-reflected Gray
/// codes (most-significant bit first).
///
/// Encode then decode lands within one quantization bin:
/// |decode(encode(v)) - clamp(v)| <= (hi - lo) / (2^k - 1), up to f64
/// resolution once k exceeds the 53-bit mantissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayCodec {
    k: usize,
    lo: f64,
    hi: f64,
}

impl GrayCodec {
    pub fn new(k: usize, lo: f64, hi: f64) -> Result<GrayCodec> {
        if k < 1 || k > 128 {
            return Err(CoreError::InvalidArgument(format!(
                "bits per coordinate must be in 1..=128, got {k}"
            )));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(CoreError::InvalidArgument(format!(
                "invalid range [{lo}, {hi}]"
            )));
        }
        Ok(GrayCodec { k, lo, hi })
    }

    pub fn bits(&self) -> usize {
        self.k
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Number of quantization levels minus one, as f64.
    fn levels(&self) -> f64 {
        // exact for k <= 53; the rounding above that is below f64 resolution
        2f64.powi(self.k as i32) - 1.0
    }

    fn max_index(&self) -> u128 {
        if self.k == 128 {
            u128::MAX
        } else {
            (1u128 << self.k) - 1
        }
    }

    /// Quantization index of `v` after clamping to [lo, hi];
    /// round-half-away-from-zero.
    pub fn quantize(&self, v: f64) -> u128 {
        let clamped = v.clamp(self.lo, self.hi);
        let frac = (clamped - self.lo) / (self.hi - self.lo);
        let idx = (frac * self.levels()).round();
        if idx <= 0.0 {
            0
        } else if idx >= self.max_index() as f64 {
            self.max_index()
        } else {
            idx as u128
        }
    }

    /// Gray code of the quantization index, MSB first.
    pub fn float_to_gray(&self, v: f64) -> Vec<bool> {
        let idx = self.quantize(v);
        let gray = idx ^ (idx >> 1);
        (0..self.k)
            .map(|b| (gray >> (self.k - 1 - b)) & 1 == 1)
            .collect()
    }

    /// Inverse: prefix-XOR the Gray bits back to the index, then rescale.
    pub fn gray_to_float(&self, bits: &[bool]) -> Result<f64> {
        if bits.len() != self.k {
            return Err(CoreError::DimensionMismatch {
                expected: self.k,
                got: bits.len(),
            });
        }
        let mut idx: u128 = 0;
        let mut prev = false;
        for &g in bits {
            let b = prev ^ g;
            idx = (idx << 1) | b as u128;
            prev = b;
        }
        Ok(self.lo + (idx as f64 / self.levels()) * (self.hi - self.lo))
    }

    /// One quantization bin width.
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.levels()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_midpoint_example() {
        // k=4 on [0,1]: v=0.5 -> idx 8 -> binary 1000 -> gray 1100
        let codec = GrayCodec::new(4, 0.0, 1.0).unwrap();
        assert_eq!(codec.quantize(0.5), 8);
        assert_eq!(
            codec.float_to_gray(0.5),
            vec![true, true, false, false]
        );
    }

    #[test]
    fn endpoints() {
        let codec = GrayCodec::new(4, 0.0, 1.0).unwrap();
        assert_eq!(codec.float_to_gray(0.0), vec![false; 4]);
        // v = hi: idx 15 -> gray 15 ^ 7 = 8 -> 1000
        assert_eq!(
            codec.float_to_gray(1.0),
            vec![true, false, false, false]
        );
        // out-of-range values clamp
        assert_eq!(codec.float_to_gray(-5.0), vec![false; 4]);
        assert_eq!(codec.float_to_gray(7.0), codec.float_to_gray(1.0));
    }

    #[test]
    fn decode_worked_example() {
        let codec = GrayCodec::new(4, 0.0, 1.0).unwrap();
        let v = codec.gray_to_float(&[true, true, false, false]).unwrap();
        assert!((v - 8.0 / 15.0).abs() < 1e-15);
        assert_eq!(codec.gray_to_float(&[false; 4]).unwrap(), 0.0);
        assert!(codec.gray_to_float(&[false; 3]).is_err());
    }

    #[test]
    fn consecutive_indices_differ_in_one_bit() {
        // exhaustive over k <= 12
        for k in 1..=12usize {
            let codec = GrayCodec::new(k, -1.0, 1.0).unwrap();
            let n = 1u128 << k;
            let gray_of = |idx: u128| idx ^ (idx >> 1);
            for idx in 1..n {
                let a = gray_of(idx - 1);
                let b = gray_of(idx);
                assert_eq!((a ^ b).count_ones(), 1, "k={k} idx={idx}");
            }
            let _ = codec;
        }
    }

    #[test]
    fn roundtrip_within_one_bin() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for &k in &[1usize, 2, 5, 8, 16, 24, 32, 48] {
            let codec = GrayCodec::new(k, -4.0, 4.0).unwrap();
            let bin = codec.bin_width();
            for _ in 0..2000 {
                let v = next() * 10.0 - 5.0; // includes out-of-range values
                let bits = codec.float_to_gray(v);
                let back = codec.gray_to_float(&bits).unwrap();
                let clamped = v.clamp(-4.0, 4.0);
                assert!(
                    (back - clamped).abs() <= bin * 0.5 + 1e-12,
                    "k={k} v={v} back={back} bin={bin}"
                );
            }
        }
        // very wide codes: the bin is below f64 resolution; stay within a
        // few ulps of the span instead
        for &k in &[64usize, 100, 128] {
            let codec = GrayCodec::new(k, -4.0, 4.0).unwrap();
            for _ in 0..200 {
                let v = next() * 8.0 - 4.0;
                let bits = codec.float_to_gray(v);
                let back = codec.gray_to_float(&bits).unwrap();
                assert!((back - v).abs() <= 8.0 * 2f64.powi(-50), "k={k} v={v} back={back}");
            }
        }
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(GrayCodec::new(0, 0.0, 1.0).is_err());
        assert!(GrayCodec::new(129, 0.0, 1.0).is_err());
        assert!(GrayCodec::new(4, 1.0, 1.0).is_err());
        assert!(GrayCodec::new(4, 2.0, 1.0).is_err());
    }
}
