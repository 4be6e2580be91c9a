use crate::bits::{BitBatch, Encoding};
use crate::error::{CoreError, Result};
use crate::sampler::{standard_normal, RngStream};
use crate::tensor::{matmul, swish, NodeId, ParamSet, Tape, Tensor};

/// MLP energy over {0,1}^d: `depth` hidden layers of `width` units with the
/// swish activation, ending in a scalar. `depth == 0` gives a plain affine
/// (linear) energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpEnergy {
    dim: usize,
    width: usize,
    depth: usize,
    params: ParamSet,
}

impl MlpEnergy {
    /// He-style initialization: W ~ N(0, 2/fan_in), biases zero.
    pub fn new(dim: usize, width: usize, depth: usize, rng: &mut RngStream) -> Result<MlpEnergy> {
        if dim == 0 {
            return Err(CoreError::InvalidArgument("dimension must be > 0".into()));
        }
        if depth > 0 && width == 0 {
            return Err(CoreError::InvalidArgument("width must be > 0".into()));
        }
        let mut params = ParamSet::new();
        let mut fan_in = dim;
        for layer in 0..depth {
            params.push(format!("w{layer}"), gaussian_matrix(fan_in, width, rng)?);
            params.push(format!("b{layer}"), Tensor::zeros(&[width]));
            fan_in = width;
        }
        params.push(format!("w{depth}"), gaussian_matrix(fan_in, 1, rng)?);
        params.push(format!("b{depth}"), Tensor::zeros(&[1]));
        Ok(MlpEnergy {
            dim,
            width,
            depth,
            params,
        })
    }

    /// Rebuild from checkpointed parameters.
    pub fn from_params(dim: usize, width: usize, depth: usize, params: ParamSet) -> Result<MlpEnergy> {
        let expected = 2 * (depth + 1);
        if params.len() != expected {
            return Err(CoreError::ShapeMismatch(format!(
                "MLP with depth {depth} expects {expected} parameter tensors, got {}",
                params.len()
            )));
        }
        Ok(MlpEnergy {
            dim,
            width,
            depth,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Direct batched forward pass. Produces bitwise-identical values to the
    /// tape path (same kernels, same op order) without tape bookkeeping.
    pub fn forward_rows(&self, rows: &Tensor) -> Result<Vec<f64>> {
        let (m, d) = rows.rows_cols();
        if d != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: d,
            });
        }
        let mut cur: Vec<f64> = rows.data().to_vec();
        let mut cur_cols = d;
        for layer in 0..=self.depth {
            let w = self.params.tensor_at(2 * layer);
            let b = self.params.tensor_at(2 * layer + 1);
            let out_cols = w.shape()[1];
            let mut next = vec![0.0; m * out_cols];
            for row in next.chunks_mut(out_cols) {
                row.copy_from_slice(b.data());
            }
            matmul(&cur, w.data(), &mut next, m, cur_cols, out_cols);
            if layer < self.depth {
                for v in next.iter_mut() {
                    *v = swish(*v);
                }
            }
            cur = next;
            cur_cols = out_cols;
        }
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(CoreError::non_finite("MLP energy"));
        }
        Ok(cur)
    }

    /// Record the batched energy computation on a tape. Returns the (m,)
    /// energy node and, when `track_params` is set, the parameter leaf
    /// handles in [`ParamSet`] order.
    pub fn tape_energies(
        &self,
        tape: &mut Tape,
        rows_node: NodeId,
        track_params: bool,
    ) -> Result<(NodeId, Vec<NodeId>)> {
        let mut handles = Vec::with_capacity(self.params.len());
        for (_, t) in self.params.iter() {
            let id = if track_params {
                tape.param(t.clone())?
            } else {
                tape.constant(t.clone())?
            };
            handles.push(id);
        }
        let mut cur = rows_node;
        for layer in 0..=self.depth {
            let w = handles[2 * layer];
            let b = handles[2 * layer + 1];
            cur = tape.affine(cur, w, b)?;
            if layer < self.depth {
                cur = tape.swish(cur)?;
            }
        }
        Ok((cur, handles))
    }

    /// Gradient of the continuous extension of the energy with respect to
    /// the inputs, one d-vector per row.
    pub fn grad_input(&self, batch: &BitBatch, enc: Encoding) -> Result<Tensor> {
        if batch.d() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: batch.d(),
            });
        }
        let mut tape = Tape::new();
        let x = tape.param(batch.to_f64_matrix(enc))?;
        let (energies, _) = self.tape_energies(&mut tape, x, false)?;
        // d(sum of energies)/dx gives each row's own gradient: rows are
        // independent in the forward pass.
        let total = tape.dot_const(energies, vec![1.0; batch.n()])?;
        let mut grads = tape.backward(total)?;
        grads
            .take(x)
            .ok_or_else(|| CoreError::InvalidArgument("input gradient missing".into()))
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Result<Tensor> {
    let std = (2.0 / rows as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| std * standard_normal(rng)).collect();
    Tensor::from_vec(&[rows, cols], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVector;

    #[test]
    fn zero_final_layer_gives_constant_energy() {
        let mut rng = RngStream::new(7, 0);
        let mut mlp = MlpEnergy::new(5, 8, 2, &mut rng).unwrap();
        let last_w = mlp.params.len() - 2;
        for v in mlp.params.tensor_at_mut(last_w).data_mut() {
            *v = 0.0;
        }
        let bias_idx = mlp.params.len() - 1;
        mlp.params.tensor_at_mut(bias_idx).data_mut()[0] = 1.25;

        let mut batch = BitBatch::new(5).unwrap();
        batch.push(&BitVector::from_index(5, 0).unwrap()).unwrap();
        batch.push(&BitVector::from_index(5, 19).unwrap()).unwrap();
        batch.push(&BitVector::from_index(5, 31).unwrap()).unwrap();
        let e = mlp.forward_rows(&batch.to_f64_matrix(Encoding::ZeroOne)).unwrap();
        for v in e {
            assert!((v - 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn tape_and_direct_forward_agree_bitwise() {
        let mut rng = RngStream::new(11, 0);
        let mlp = MlpEnergy::new(7, 16, 3, &mut rng).unwrap();
        let mut batch = BitBatch::new(7).unwrap();
        for idx in [0usize, 5, 77, 127, 64] {
            batch.push(&BitVector::from_index(7, idx).unwrap()).unwrap();
        }
        let rows = batch.to_f64_matrix(Encoding::ZeroOne);
        let direct = mlp.forward_rows(&rows).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(rows).unwrap();
        let (e, _) = mlp.tape_energies(&mut tape, x, false).unwrap();
        let taped = tape.value(e).data().to_vec();
        assert_eq!(direct.len(), taped.len());
        for (a, b) in direct.iter().zip(taped.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn depth_zero_is_linear() {
        let mut rng = RngStream::new(3, 0);
        let mut mlp = MlpEnergy::new(3, 0, 0, &mut rng).unwrap();
        let w = mlp.params.tensor_at_mut(0).data_mut();
        w.copy_from_slice(&[1.0, 2.0, 4.0]);
        let mut batch = BitBatch::new(3).unwrap();
        for idx in 0..8 {
            batch.push(&BitVector::from_index(3, idx).unwrap()).unwrap();
        }
        let e = mlp.forward_rows(&batch.to_f64_matrix(Encoding::ZeroOne)).unwrap();
        for (idx, v) in e.iter().enumerate() {
            let want = (idx & 1) as f64 + 2.0 * ((idx >> 1) & 1) as f64 + 4.0 * ((idx >> 2) & 1) as f64;
            assert!((v - want).abs() < 1e-15);
        }
    }
}
