use crate::bits::{BitBatch, BitVector, Encoding};
use crate::error::{CoreError, Result};
use crate::tensor::{coupling_energy_row, coupling_matvec, NodeId, ParamSet, Tape, Tensor};

/// Pairwise binary energy E(x) = -v' J v - b' v with J symmetric and
/// zero-diagonal, where v is the encoded value vector of x.
///
/// Two forms:
/// - fixed: J = sigma * A for a given adjacency A (the data-generating
///   "true model"); nothing is learnable.
/// - learnable: J parameterized by its strict upper triangle, so symmetry
///   and the zero diagonal hold by construction; b is learnable too.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingEnergy {
    dim: usize,
    encoding: Encoding,
    form: Form,
    /// Empty in fixed form.
    params: ParamSet,
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Fixed {
        neighbors: Vec<Vec<u32>>,
        sigma: f64,
        bias: Vec<f64>,
        /// Set when the adjacency is a cyclic 2-D lattice of this side.
        side: Option<u32>,
    },
    Learnable,
}

impl IsingEnergy {
    /// Fixed true model on a cyclic 2-D lattice (torus); every node has
    /// exactly 4 neighbors. Requires side >= 3 so neighbors are distinct.
    pub fn cyclic_lattice(side: usize, sigma: f64, encoding: Encoding) -> Result<IsingEnergy> {
        if side < 3 {
            return Err(CoreError::InvalidArgument(
                "cyclic lattice needs side >= 3".into(),
            ));
        }
        let d = side * side;
        let mut neighbors = vec![Vec::with_capacity(4); d];
        let at = |r: usize, c: usize| (r % side) * side + (c % side);
        for r in 0..side {
            for c in 0..side {
                let i = at(r, c);
                neighbors[i] = vec![
                    at(r + side - 1, c) as u32,
                    at(r + 1, c) as u32,
                    at(r, c + side - 1) as u32,
                    at(r, c + 1) as u32,
                ];
                // canonical order keeps summation order identical no matter
                // how the model was constructed (fresh or from a checkpoint)
                neighbors[i].sort_unstable();
            }
        }
        Ok(IsingEnergy {
            dim: d,
            encoding,
            form: Form::Fixed {
                neighbors,
                sigma,
                bias: vec![0.0; d],
                side: Some(side as u32),
            },
            params: ParamSet::new(),
        })
    }

    /// Fixed model on a 1-D cyclic ring; degenerate lattice used in tests.
    pub fn cyclic_ring(len: usize, sigma: f64, encoding: Encoding) -> Result<IsingEnergy> {
        if len < 3 {
            return Err(CoreError::InvalidArgument("ring needs length >= 3".into()));
        }
        let neighbors = (0..len)
            .map(|i| {
                let mut ns = vec![((i + len - 1) % len) as u32, ((i + 1) % len) as u32];
                ns.sort_unstable();
                ns
            })
            .collect();
        Ok(IsingEnergy {
            dim: len,
            encoding,
            form: Form::Fixed {
                neighbors,
                sigma,
                bias: vec![0.0; len],
                side: None,
            },
            params: ParamSet::new(),
        })
    }

    /// Learnable model with J and b initialized to zero.
    pub fn learnable(dim: usize, encoding: Encoding) -> Result<IsingEnergy> {
        if dim < 2 {
            return Err(CoreError::InvalidArgument(
                "learnable coupling model needs dim >= 2".into(),
            ));
        }
        let mut params = ParamSet::new();
        params.push("j_upper", Tensor::zeros(&[dim * (dim - 1) / 2]));
        params.push("bias", Tensor::zeros(&[dim]));
        Ok(IsingEnergy {
            dim,
            encoding,
            form: Form::Learnable,
            params,
        })
    }

    pub fn learnable_from_params(
        dim: usize,
        encoding: Encoding,
        params: ParamSet,
    ) -> Result<IsingEnergy> {
        let model = IsingEnergy::learnable(dim, encoding)?;
        if params.len() != 2
            || params.tensor_at(0).len() != dim * (dim - 1) / 2
            || params.tensor_at(1).len() != dim
        {
            return Err(CoreError::ShapeMismatch(
                "coupling parameters do not match dimension".into(),
            ));
        }
        Ok(IsingEnergy { params, ..model })
    }

    pub fn fixed_from_dense(
        dense_j: &Tensor,
        sigma: f64,
        bias: Vec<f64>,
        encoding: Encoding,
        side: Option<u32>,
    ) -> Result<IsingEnergy> {
        let d = bias.len();
        if dense_j.shape() != [d, d] {
            return Err(CoreError::ShapeMismatch(
                "adjacency must be d x d with d = bias length".into(),
            ));
        }
        let jd = dense_j.data();
        let mut neighbors = vec![Vec::new(); d];
        for i in 0..d {
            if jd[i * d + i] != 0.0 {
                return Err(CoreError::InvalidArgument(
                    "adjacency diagonal must be zero".into(),
                ));
            }
            for j in 0..d {
                if (jd[i * d + j] - jd[j * d + i]).abs() > 0.0 {
                    return Err(CoreError::InvalidArgument(
                        "adjacency must be symmetric".into(),
                    ));
                }
                if jd[i * d + j] != 0.0 {
                    if jd[i * d + j] != 1.0 {
                        return Err(CoreError::InvalidArgument(
                            "fixed adjacency entries must be 0 or 1".into(),
                        ));
                    }
                    neighbors[i].push(j as u32);
                }
            }
        }
        Ok(IsingEnergy {
            dim: d,
            encoding,
            form: Form::Fixed {
                neighbors,
                sigma,
                bias,
                side,
            },
            params: ParamSet::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self.form, Form::Learnable)
    }

    pub fn sigma(&self) -> Option<f64> {
        match &self.form {
            Form::Fixed { sigma, .. } => Some(*sigma),
            Form::Learnable => None,
        }
    }

    pub fn side(&self) -> Option<u32> {
        match &self.form {
            Form::Fixed { side, .. } => *side,
            Form::Learnable => None,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// The effective coupling matrix as a dense d x d tensor: sigma * A in
    /// fixed form, the symmetric expansion of the learned upper triangle in
    /// learnable form.
    pub fn dense_coupling(&self) -> Tensor {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        match &self.form {
            Form::Fixed {
                neighbors, sigma, ..
            } => {
                for (i, ns) in neighbors.iter().enumerate() {
                    for &j in ns {
                        out[i * d + j as usize] = *sigma;
                    }
                }
            }
            Form::Learnable => {
                let u = self.params.tensor_at(0).data();
                let mut idx = 0;
                for i in 0..d {
                    for j in i + 1..d {
                        out[i * d + j] = u[idx];
                        out[j * d + i] = u[idx];
                        idx += 1;
                    }
                }
            }
        }
        Tensor::from_vec(&[d, d], out).expect("coupling matrix is finite")
    }

    pub fn bias_values(&self) -> Vec<f64> {
        match &self.form {
            Form::Fixed { bias, .. } => bias.clone(),
            Form::Learnable => self.params.tensor_at(1).data().to_vec(),
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// J v for the encoded value vector of `x`.
    fn coupling_times(&self, v: &[f64]) -> Vec<f64> {
        match &self.form {
            Form::Fixed {
                neighbors, sigma, ..
            } => {
                let mut out = vec![0.0; self.dim];
                for (i, ns) in neighbors.iter().enumerate() {
                    let mut acc = 0.0;
                    for &j in ns {
                        acc += v[j as usize];
                    }
                    out[i] = sigma * acc;
                }
                out
            }
            Form::Learnable => coupling_matvec(self.params.tensor_at(0).data(), v, self.dim),
        }
    }

    pub fn energy_of_values(&self, v: &[f64]) -> f64 {
        match &self.form {
            Form::Fixed {
                neighbors,
                sigma,
                bias,
                ..
            } => {
                let mut quad = 0.0;
                for (i, ns) in neighbors.iter().enumerate() {
                    let vi = v[i];
                    if vi == 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for &j in ns {
                        acc += v[j as usize];
                    }
                    quad += vi * acc;
                }
                let lin: f64 = bias.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                -sigma * quad - lin
            }
            Form::Learnable => coupling_energy_row(
                self.params.tensor_at(0).data(),
                self.params.tensor_at(1).data(),
                v,
                self.dim,
            ),
        }
    }

    pub fn energy_one(&self, x: &BitVector) -> Result<f64> {
        self.check_dim(x.d())?;
        let v = x.to_f64(self.encoding);
        let e = self.energy_of_values(&v);
        if !e.is_finite() {
            return Err(CoreError::non_finite("coupling energy"));
        }
        Ok(e)
    }

    pub fn energy_batch(&self, batch: &BitBatch) -> Result<Vec<f64>> {
        self.check_dim(batch.d())?;
        let mut v = vec![0.0; self.dim];
        let mut out = Vec::with_capacity(batch.n());
        for r in 0..batch.n() {
            batch.row(r).write_f64_into(self.encoding, &mut v);
            let e = self.energy_of_values(&v);
            if !e.is_finite() {
                return Err(CoreError::non_finite("coupling energy"));
            }
            out.push(e);
        }
        Ok(out)
    }

    /// Analytic input gradient of the continuous extension:
    /// dE/dx = enc_scale * (-2 J v - b), where enc_scale = dv/dx.
    pub fn grad_input(&self, batch: &BitBatch) -> Result<Tensor> {
        self.check_dim(batch.d())?;
        let enc_scale = match self.encoding {
            Encoding::ZeroOne => 1.0,
            Encoding::PlusMinusOne => 2.0,
        };
        let bias = self.bias_values();
        let mut out = vec![0.0; batch.n() * self.dim];
        let mut v = vec![0.0; self.dim];
        for r in 0..batch.n() {
            batch.row(r).write_f64_into(self.encoding, &mut v);
            let jv = self.coupling_times(&v);
            let row = &mut out[r * self.dim..(r + 1) * self.dim];
            for i in 0..self.dim {
                row[i] = enc_scale * (-2.0 * jv[i] - bias[i]);
            }
        }
        Tensor::from_vec(&[batch.n(), self.dim], out)
    }

    /// Energies of all d single-flip neighbors via the O(degree)-per-flip
    /// delta: E(x_{-i}) = E(x) - delta_i (2 (J v)_i + b_i), with delta_i the
    /// change in encoded value at i.
    pub fn neighbor_energies(&self, x: &BitVector) -> Result<Vec<f64>> {
        self.check_dim(x.d())?;
        let v = x.to_f64(self.encoding);
        let e0 = self.energy_of_values(&v);
        let jv = self.coupling_times(&v);
        let bias = self.bias_values();
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let delta = self.encoding.flip_delta(x.get(i));
            let e = e0 - delta * (2.0 * jv[i] + bias[i]);
            if !e.is_finite() {
                return Err(CoreError::non_finite("coupling flip energy"));
            }
            out.push(e);
        }
        Ok(out)
    }

    /// Energy change if bit `i` were flipped: E(x_{-i}) - E(x). O(degree)
    /// in fixed form; used by the Gibbs sweep.
    pub fn flip_delta(&self, x: &BitVector, i: usize) -> f64 {
        let delta = self.encoding.flip_delta(x.get(i));
        let bias = match &self.form {
            Form::Fixed { bias, .. } => bias[i],
            Form::Learnable => self.params.tensor_at(1).data()[i],
        };
        let jv_i = match &self.form {
            Form::Fixed {
                neighbors, sigma, ..
            } => {
                let mut acc = 0.0;
                for &j in &neighbors[i] {
                    acc += self.encoding.value(x.get(j as usize));
                }
                sigma * acc
            }
            Form::Learnable => {
                let u = self.params.tensor_at(0).data();
                let d = self.dim;
                let mut acc = 0.0;
                for j in 0..d {
                    if j == i {
                        continue;
                    }
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    let idx = a * d - a * (a + 1) / 2 + (b - a - 1);
                    acc += u[idx] * self.encoding.value(x.get(j));
                }
                acc
            }
        };
        -delta * (2.0 * jv_i + bias)
    }

    /// Record batched energies on the tape (learnable form only).
    pub fn tape_energies(
        &self,
        tape: &mut Tape,
        batch: &BitBatch,
        track_params: bool,
    ) -> Result<(NodeId, Vec<NodeId>)> {
        if !self.is_learnable() {
            return Err(CoreError::InvalidArgument(
                "fixed coupling model has no trainable parameters".into(),
            ));
        }
        self.check_dim(batch.d())?;
        let ju = self.params.tensor_at(0).clone();
        let bias = self.params.tensor_at(1).clone();
        let (ju_id, bias_id) = if track_params {
            (tape.param(ju)?, tape.param(bias)?)
        } else {
            (tape.constant(ju)?, tape.constant(bias)?)
        };
        let values = tape.constant(batch.to_f64_matrix(self.encoding))?;
        let e = tape.coupling_energies(ju_id, bias_id, values)?;
        Ok((e, vec![ju_id, bias_id]))
    }
}
