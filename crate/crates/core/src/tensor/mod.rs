//! Dense 64-bit tensors, the reverse-mode tape, the Adam optimizer, and a
//! finite-difference gradient oracle.
//!
//! The tape records only what MLP and lattice energies need (affine layers,
//! swish/sigmoid, exp, clamp, anchored differences, constant-weight sums);
//! there is no general graph engine. All arithmetic is f64: the losses here
//! exponentiate energy differences, which makes f32 precision risky.

mod adam;
mod fd;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fd::finite_diff_grad;
pub(crate) use tape::{coupling_energy_row, coupling_matvec};
pub use tape::{Grads, NodeId, Tape};

use crate::error::{CoreError, Result};
use rayon::prelude::*;

/// Row-major dense array of f64 values.
///
/// Tensors are immutable values once created; every public constructor
/// rejects non-finite data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "shape {:?} implies {} elements, data has {}",
                shape,
                expected,
                data.len()
            )));
        }
        let t = Tensor {
            shape: shape.to_vec(),
            data,
        };
        t.check_finite("tensor construction")?;
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access for initialization and optimizer updates. Callers are
    /// responsible for keeping values finite; evaluation paths re-check.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> Result<f64> {
        if !self.is_scalar() {
            return Err(CoreError::ShapeMismatch(format!(
                "expected scalar, got shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    /// Rows and columns of a 2-D tensor; 1-D is treated as a single row.
    pub fn rows_cols(&self) -> (usize, usize) {
        match self.shape.len() {
            2 => (self.shape[0], self.shape[1]),
            1 => (1, self.shape[0]),
            _ => (1, self.data.len()),
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(CoreError::non_finite(context))
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(CoreError::ShapeMismatch(format!(
                "add_assign {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub(crate) fn scale_in_place(&mut self, c: f64) {
        for v in self.data.iter_mut() {
            *v *= c;
        }
    }
}

/// Ordered, named parameter tensors. Order is stable and is the contract for
/// checkpoints and gradient records.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet {
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.push((name.into(), tensor));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn total_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn tensor_at(&self, idx: usize) -> &Tensor {
        &self.entries[idx].1
    }

    pub fn tensor_at_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].1
    }

    pub fn name_at(&self, idx: usize) -> &str {
        &self.entries[idx].0
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// One gradient tensor per [`ParamSet`] entry, in the same order with
/// matching shapes.
#[derive(Debug, Clone)]
pub struct GradRecord {
    entries: Vec<(String, Tensor)>,
}

impl GradRecord {
    /// All-zero gradients shaped like `params`.
    pub fn zeros_like(params: &ParamSet) -> GradRecord {
        GradRecord {
            entries: params
                .iter()
                .map(|(n, t)| (n.to_string(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    pub fn from_entries(entries: Vec<(String, Tensor)>) -> GradRecord {
        GradRecord { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensor_at(&self, idx: usize) -> &Tensor {
        &self.entries[idx].1
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn add_assign(&mut self, other: &GradRecord) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(CoreError::ShapeMismatch(
                "gradient records have different entry counts".into(),
            ));
        }
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(other.entries.iter()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for (_, t) in self.entries.iter_mut() {
            t.scale_in_place(c);
        }
    }

    pub(crate) fn tensor_at_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].1
    }

    /// Check that shapes line up with `params`, entry by entry.
    pub fn check_matches(&self, params: &ParamSet) -> Result<()> {
        if self.entries.len() != params.len() {
            return Err(CoreError::ShapeMismatch(
                "gradient record entry count differs from parameter set".into(),
            ));
        }
        for (i, (name, t)) in self.entries.iter().enumerate() {
            let p = params.tensor_at(i);
            if name != params.name_at(i) || t.shape() != p.shape() {
                return Err(CoreError::ShapeMismatch(format!(
                    "gradient entry {i} ({name}) does not match parameter {}",
                    params.name_at(i)
                )));
            }
        }
        Ok(())
    }
}

/// Numerically stable logistic function, branchwise to avoid overflow for
/// |z| beyond ~30.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// swish(z) = z * sigmoid(z)
#[inline]
pub fn swish(z: f64) -> f64 {
    z * sigmoid(z)
}

/// d/dz swish(z) = s(z) * (1 + z * (1 - s(z)))
#[inline]
pub fn swish_derivative(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Elementwise swish over a tensor.
pub fn swish_tensor(z: &Tensor) -> Tensor {
    Tensor {
        shape: z.shape.clone(),
        data: z.data.iter().map(|&v| swish(v)).collect(),
    }
}

// Row counts below this stay single-threaded; tiny batches are common in the
// Gibbs inner loop and thread handoff would dominate.
const PAR_ROW_THRESHOLD: usize = 64;

/// C (m x n) = A (m x k) * B (k x n).
///
/// Each output row is accumulated over k in a fixed order, so results are
/// bitwise deterministic regardless of thread scheduling. Rows are processed
/// four at a time so a loaded B row serves four accumulations.
pub(crate) fn matmul(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let quad = |c_quad: &mut [f64], i0: usize| {
        let rows = c_quad.len() / n;
        if rows == 4 {
            let (c0, rest) = c_quad.split_at_mut(n);
            let (c1, rest) = rest.split_at_mut(n);
            let (c2, c3) = rest.split_at_mut(n);
            let a0 = &a[i0 * k..(i0 + 1) * k];
            let a1 = &a[(i0 + 1) * k..(i0 + 2) * k];
            let a2 = &a[(i0 + 2) * k..(i0 + 3) * k];
            let a3 = &a[(i0 + 3) * k..(i0 + 4) * k];
            for kk in 0..k {
                let (v0, v1, v2, v3) = (a0[kk], a1[kk], a2[kk], a3[kk]);
                if v0 == 0.0 && v1 == 0.0 && v2 == 0.0 && v3 == 0.0 {
                    continue;
                }
                let b_row = &b[kk * n..(kk + 1) * n];
                for j in 0..n {
                    let bv = b_row[j];
                    c0[j] += v0 * bv;
                    c1[j] += v1 * bv;
                    c2[j] += v2 * bv;
                    c3[j] += v3 * bv;
                }
            }
        } else {
            for (r, c_row) in c_quad.chunks_mut(n).enumerate() {
                let a_row = &a[(i0 + r) * k..(i0 + r + 1) * k];
                for (kk, &aik) in a_row.iter().enumerate() {
                    if aik == 0.0 {
                        continue;
                    }
                    let b_row = &b[kk * n..(kk + 1) * n];
                    for (cv, bv) in c_row.iter_mut().zip(b_row.iter()) {
                        *cv += aik * bv;
                    }
                }
            }
        }
    };
    if m >= PAR_ROW_THRESHOLD {
        c.par_chunks_mut(4 * n)
            .enumerate()
            .for_each(|(q, c_quad)| quad(c_quad, q * 4));
    } else {
        for (q, c_quad) in c.chunks_mut(4 * n).enumerate() {
            quad(c_quad, q * 4);
        }
    }
}

/// C (m x k) = A (m x n) * B^T where B is (k x n). Used for dX = dY * W^T.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    // pairs of output rows share each loaded B row and give the dot
    // products independent accumulator chains
    let pair = |c_pair: &mut [f64], i0: usize| {
        let rows = c_pair.len() / k;
        if rows == 2 {
            let (c0, c1) = c_pair.split_at_mut(k);
            let a0 = &a[i0 * n..(i0 + 1) * n];
            let a1 = &a[(i0 + 1) * n..(i0 + 2) * n];
            for j in 0..k {
                let b_row = &b[j * n..(j + 1) * n];
                let mut acc0 = 0.0;
                let mut acc1 = 0.0;
                for t in 0..n {
                    let bv = b_row[t];
                    acc0 += a0[t] * bv;
                    acc1 += a1[t] * bv;
                }
                c0[j] += acc0;
                c1[j] += acc1;
            }
        } else {
            let a_row = &a[i0 * n..(i0 + 1) * n];
            for (j, cv) in c_pair.iter_mut().enumerate() {
                let b_row = &b[j * n..(j + 1) * n];
                let mut acc = 0.0;
                for (av, bv) in a_row.iter().zip(b_row.iter()) {
                    acc += av * bv;
                }
                *cv += acc;
            }
        }
    };
    if m >= PAR_ROW_THRESHOLD {
        c.par_chunks_mut(2 * k)
            .enumerate()
            .for_each(|(p, c_pair)| pair(c_pair, p * 2));
    } else {
        for (p, c_pair) in c.chunks_mut(2 * k).enumerate() {
            pair(c_pair, p * 2);
        }
    }
}

/// C (k x n) = A^T * B where A is (m x k), B is (m x n). Used for dW = X^T * dY.
///
/// Parallelized over output rows; each element accumulates over sample rows
/// in index order, keeping the reduction deterministic.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    // Output rows are split into contiguous blocks; within a block we stream
    // X and dY once, which keeps the dW block cache-resident.
    let block = 64.min(k.max(1));
    let blocks: Vec<usize> = (0..k).step_by(block).collect();
    let body = |&start: &usize| {
        let end = (start + block).min(k);
        // SAFETY-free approach: compute into a local buffer, copy out.
        let mut local = vec![0.0; (end - start) * n];
        for r in 0..m {
            let a_row = &a[r * k..(r + 1) * k];
            let b_row = &b[r * n..(r + 1) * n];
            for i in start..end {
                let aik = a_row[i];
                if aik == 0.0 {
                    continue;
                }
                let l_row = &mut local[(i - start) * n..(i - start + 1) * n];
                for (lv, bv) in l_row.iter_mut().zip(b_row.iter()) {
                    *lv += aik * bv;
                }
            }
        }
        (start, local)
    };
    let parts: Vec<(usize, Vec<f64>)> = if m * k >= 4096 && blocks.len() > 1 {
        blocks.par_iter().map(body).collect()
    } else {
        blocks.iter().map(body).collect()
    };
    for (start, local) in parts {
        let end = (start + block).min(k);
        c[start * n..end * n]
            .iter_mut()
            .zip(local.iter())
            .for_each(|(cv, lv)| *cv += lv);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for kk in 0..k {
                    acc += a[i * k + kk] * b[kk * n + j];
                }
                c[i * n + j] = acc;
            }
        }
        c
    }

    #[test]
    fn tensor_shape_invariant() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[2], vec![1.0, f64::NAN]).is_err());
        assert!(Tensor::from_vec(&[2], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn swish_values() {
        assert_eq!(swish(0.0), 0.0);
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((swish(1.0) - s1).abs() < 1e-15);
        // large negative input stays finite and tiny
        let v = swish(-20.0);
        assert!(v.is_finite());
        assert!(v.abs() < 1e-7);
        assert!(v < 0.0);
    }

    #[test]
    fn sigmoid_stable_at_extremes() {
        assert!(sigmoid(800.0).is_finite());
        assert!(sigmoid(-800.0).is_finite());
        assert!((sigmoid(800.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-800.0).abs() < 1e-15);
    }

    #[test]
    fn matmul_matches_naive() {
        let mut state = 0x243f6a8885a308d3u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for &(m, k, n) in &[(1, 1, 1), (3, 4, 5), (7, 2, 9), (70, 33, 17)] {
            let a: Vec<f64> = (0..m * k).map(|_| next()).collect();
            let b: Vec<f64> = (0..k * n).map(|_| next()).collect();
            let want = naive_matmul(&a, &b, m, k, n);

            let mut c = vec![0.0; m * n];
            matmul(&a, &b, &mut c, m, k, n);
            for (x, y) in c.iter().zip(want.iter()) {
                assert!((x - y).abs() < 1e-12);
            }

            // A * B == (B^T stored row-major) via matmul_nt
            let mut bt = vec![0.0; k * n];
            for i in 0..k {
                for j in 0..n {
                    bt[j * k + i] = b[i * n + j];
                }
            }
            let mut c2 = vec![0.0; m * n];
            matmul_nt(&a, &bt, &mut c2, m, k, n);
            for (x, y) in c2.iter().zip(want.iter()) {
                assert!((x - y).abs() < 1e-12);
            }

            // A^T path: C = A^T * A2 with A (m x k), A2 (m x n)
            let a2: Vec<f64> = (0..m * n).map(|_| next()).collect();
            let mut at = vec![0.0; k * m];
            for i in 0..m {
                for j in 0..k {
                    at[j * m + i] = a[i * k + j];
                }
            }
            let want_tn = naive_matmul(&at, &a2, k, m, n);
            let mut c3 = vec![0.0; k * n];
            matmul_tn(&a, &a2, &mut c3, m, k, n);
            for (x, y) in c3.iter().zip(want_tn.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
