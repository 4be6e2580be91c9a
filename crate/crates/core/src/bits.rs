//! Packed binary vectors and batches: the universal sample representation
//! for points x in {0,1}^d.

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;
use rand::Rng;

/// How bits map to real values when a model evaluates them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// 0 -> 0.0, 1 -> 1.0
    ZeroOne,
    /// 0 -> -1.0, 1 -> +1.0 (spin convention)
    PlusMinusOne,
}

impl Encoding {
    #[inline]
    pub fn value(&self, bit: bool) -> f64 {
        match self {
            Encoding::ZeroOne => {
                if bit {
                    1.0
                } else {
                    0.0
                }
            }
            Encoding::PlusMinusOne => {
                if bit {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    /// Change in encoded value when a bit flips away from `bit`.
    #[inline]
    pub fn flip_delta(&self, bit: bool) -> f64 {
        self.value(!bit) - self.value(bit)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Encoding::ZeroOne => "zero-one",
            Encoding::PlusMinusOne => "plus-minus-one",
        }
    }

    pub fn parse(s: &str) -> Result<Encoding> {
        match s {
            "zero-one" | "01" => Ok(Encoding::ZeroOne),
            "plus-minus-one" | "pm1" => Ok(Encoding::PlusMinusOne),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown encoding '{other}' (expected 'pm1' or '01')"
            ))),
        }
    }
}

/// A point in {0,1}^d, bit-packed (LSB-first within each 64-bit word).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    d: usize,
    words: Vec<u64>,
}

#[inline]
fn words_for(d: usize) -> usize {
    d.div_ceil(64)
}

impl BitVector {
    pub fn zeros(d: usize) -> Result<BitVector> {
        if d == 0 {
            return Err(CoreError::InvalidArgument("dimension must be > 0".into()));
        }
        Ok(BitVector {
            d,
            words: vec![0; words_for(d)],
        })
    }

    pub fn from_bools(bits: &[bool]) -> Result<BitVector> {
        let mut v = BitVector::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        Ok(v)
    }

    pub fn random(d: usize, rng: &mut impl Rng) -> Result<BitVector> {
        let mut v = BitVector::zeros(d)?;
        for i in 0..d {
            v.set(i, rng.random::<bool>());
        }
        Ok(v)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.d);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.d);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip_in_place(&mut self, i: usize) {
        debug_assert!(i < self.d);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// The flip neighbor x_{-i}.
    pub fn flipped(&self, i: usize) -> BitVector {
        let mut v = self.clone();
        v.flip_in_place(i);
        v
    }

    pub fn hamming(&self, other: &BitVector) -> Result<u32> {
        if self.d != other.d {
            return Err(CoreError::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum())
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn to_f64(&self, enc: Encoding) -> Vec<f64> {
        (0..self.d).map(|i| enc.value(self.get(i))).collect()
    }

    pub fn write_f64_into(&self, enc: Encoding, dst: &mut [f64]) {
        debug_assert_eq!(dst.len(), self.d);
        for (i, slot) in dst.iter_mut().enumerate() {
            *slot = enc.value(self.get(i));
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Index of the vector within {0,1}^d read as a little-endian integer.
    /// Only valid for d <= 63; used by enumeration tests.
    pub fn to_index(&self) -> usize {
        debug_assert!(self.d <= 63);
        self.words[0] as usize
    }

    pub fn from_index(d: usize, index: usize) -> Result<BitVector> {
        let mut v = BitVector::zeros(d)?;
        if d < 64 && index >= (1usize << d) {
            return Err(CoreError::InvalidArgument(format!(
                "index {index} out of range for d={d}"
            )));
        }
        v.words[0] = index as u64;
        Ok(v)
    }
}

/// A packed matrix of n rows, each a d-bit vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBatch {
    d: usize,
    n: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitBatch {
    pub fn new(d: usize) -> Result<BitBatch> {
        if d == 0 {
            return Err(CoreError::InvalidArgument("dimension must be > 0".into()));
        }
        Ok(BitBatch {
            d,
            n: 0,
            words_per_row: words_for(d),
            words: Vec::new(),
        })
    }

    pub fn with_capacity(d: usize, n: usize) -> Result<BitBatch> {
        let mut b = BitBatch::new(d)?;
        b.words.reserve(n * b.words_per_row);
        Ok(b)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, v: &BitVector) -> Result<()> {
        if v.d() != self.d {
            return Err(CoreError::DimensionMismatch {
                expected: self.d,
                got: v.d(),
            });
        }
        self.words.extend_from_slice(v.words());
        self.n += 1;
        Ok(())
    }

    pub fn row(&self, r: usize) -> BitVector {
        debug_assert!(r < self.n);
        BitVector {
            d: self.d,
            words: self.words[r * self.words_per_row..(r + 1) * self.words_per_row].to_vec(),
        }
    }

    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.words_per_row..(r + 1) * self.words_per_row]
    }

    #[inline]
    pub fn get(&self, r: usize, i: usize) -> bool {
        (self.words[r * self.words_per_row + i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, i: usize, bit: bool) {
        let w = r * self.words_per_row + i / 64;
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[w] |= mask;
        } else {
            self.words[w] &= !mask;
        }
    }

    pub fn hamming_rows(&self, r: usize, other: &BitBatch, s: usize) -> u32 {
        self.row_words(r)
            .iter()
            .zip(other.row_words(s).iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Dense (n x d) matrix of encoded values.
    pub fn to_f64_matrix(&self, enc: Encoding) -> Tensor {
        let mut data = vec![0.0; self.n * self.d];
        for r in 0..self.n {
            for i in 0..self.d {
                data[r * self.d + i] = enc.value(self.get(r, i));
            }
        }
        Tensor::from_vec(&[self.n, self.d], data).expect("bit matrix is finite")
    }

    /// Rows selected by index, in order.
    pub fn gather(&self, indices: &[usize]) -> BitBatch {
        let mut out = BitBatch {
            d: self.d,
            n: 0,
            words_per_row: self.words_per_row,
            words: Vec::with_capacity(indices.len() * self.words_per_row),
        };
        for &r in indices {
            out.words.extend_from_slice(self.row_words(r));
            out.n += 1;
        }
        out
    }

    pub fn take_prefix(&self, count: usize) -> BitBatch {
        let count = count.min(self.n);
        BitBatch {
            d: self.d,
            n: count,
            words_per_row: self.words_per_row,
            words: self.words[..count * self.words_per_row].to_vec(),
        }
    }
}
