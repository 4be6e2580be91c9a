//! Parameterized energy functions over {0,1}^d with batched evaluation,
//! input gradients, and exhaustive single-flip neighbor energies.

mod ising;
mod mlp;

pub use ising::IsingEnergy;
pub use mlp::MlpEnergy;

use crate::bits::{BitBatch, BitVector, Encoding};
use crate::error::{CoreError, Result};
use crate::tensor::{NodeId, ParamSet, Tape, Tensor};

/// An energy function E(x): either an MLP over bits or a pairwise coupling
/// (Ising) model over encoded spins.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyModel {
    Mlp(MlpEnergy),
    Ising(IsingEnergy),
}

impl EnergyModel {
    pub fn dim(&self) -> usize {
        match self {
            EnergyModel::Mlp(m) => m.dim(),
            EnergyModel::Ising(m) => m.dim(),
        }
    }

    /// Encoding used when bits are handed to the underlying function. MLPs
    /// read raw bits; coupling models use their configured encoding.
    pub fn encoding(&self) -> Encoding {
        match self {
            EnergyModel::Mlp(_) => Encoding::ZeroOne,
            EnergyModel::Ising(m) => m.encoding(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            EnergyModel::Mlp(m) => m.params(),
            EnergyModel::Ising(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            EnergyModel::Mlp(m) => m.params_mut(),
            EnergyModel::Ising(m) => m.params_mut(),
        }
    }

    pub fn is_trainable(&self) -> bool {
        !self.params().is_empty()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// E(x) for each row of the batch.
    pub fn energy_batch(&self, batch: &BitBatch) -> Result<Vec<f64>> {
        self.check_dim(batch.d())?;
        match self {
            EnergyModel::Mlp(m) => m.forward_rows(&batch.to_f64_matrix(Encoding::ZeroOne)),
            EnergyModel::Ising(m) => m.energy_batch(batch),
        }
    }

    pub fn energy_one(&self, x: &BitVector) -> Result<f64> {
        self.check_dim(x.d())?;
        match self {
            EnergyModel::Mlp(m) => {
                let mut batch = BitBatch::new(x.d())?;
                batch.push(x)?;
                Ok(m.forward_rows(&batch.to_f64_matrix(Encoding::ZeroOne))?[0])
            }
            EnergyModel::Ising(m) => m.energy_one(x),
        }
    }

    /// Gradient of the continuous extension of E at each binary row;
    /// analytic for coupling models, reverse-mode for MLPs. The result is
    /// detached: no parameter gradients flow through it.
    pub fn grad_input(&self, batch: &BitBatch) -> Result<Tensor> {
        self.check_dim(batch.d())?;
        match self {
            EnergyModel::Mlp(m) => m.grad_input(batch, Encoding::ZeroOne),
            EnergyModel::Ising(m) => m.grad_input(batch),
        }
    }

    /// Energies of all d single-flip neighbors of `x`: a d-row batched
    /// forward for MLPs, the per-flip delta path for coupling models.
    pub fn neighbor_energies(&self, x: &BitVector) -> Result<Vec<f64>> {
        self.check_dim(x.d())?;
        match self {
            EnergyModel::Mlp(m) => {
                let d = x.d();
                let mut batch = BitBatch::with_capacity(d, d)?;
                for i in 0..d {
                    batch.push(&x.flipped(i))?;
                }
                m.forward_rows(&batch.to_f64_matrix(Encoding::ZeroOne))
            }
            EnergyModel::Ising(m) => m.neighbor_energies(x),
        }
    }

    /// E(x_{-i}) for a single flip, given E(x). MLPs re-evaluate the flipped
    /// row; coupling models add the O(degree) delta.
    pub fn flip_energy(&self, x: &BitVector, e_x: f64, i: usize) -> Result<f64> {
        match self {
            EnergyModel::Mlp(_) => self.energy_one(&x.flipped(i)),
            EnergyModel::Ising(m) => Ok(e_x + m.flip_delta(x, i)),
        }
    }

    /// Record batched energies for the rows of `batch` on `tape`. Returns
    /// the (n,)-shaped energy node and parameter handles in ParamSet order
    /// (only meaningful when `track_params`).
    pub fn tape_energies(
        &self,
        tape: &mut Tape,
        batch: &BitBatch,
        track_params: bool,
    ) -> Result<(NodeId, Vec<NodeId>)> {
        self.check_dim(batch.d())?;
        match self {
            EnergyModel::Mlp(m) => {
                let rows = tape.constant(batch.to_f64_matrix(Encoding::ZeroOne))?;
                m.tape_energies(tape, rows, track_params)
            }
            EnergyModel::Ising(m) => m.tape_energies(tape, batch, track_params),
        }
    }

    /// Short structural description used in checkpoint manifests and config
    /// hashes.
    pub fn signature(&self) -> String {
        match self {
            EnergyModel::Mlp(m) => {
                format!("mlp:d={},width={},depth={}", m.dim(), m.width(), m.depth())
            }
            EnergyModel::Ising(m) => format!(
                "ising:d={},encoding={},learnable={}",
                m.dim(),
                m.encoding().name(),
                m.is_learnable()
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RngStream;

    fn linear_model(w: &[f64]) -> EnergyModel {
        let mut rng = RngStream::new(0, 0);
        let mut m = MlpEnergy::new(w.len(), 0, 0, &mut rng).unwrap();
        m.params_mut().tensor_at_mut(0).data_mut().copy_from_slice(w);
        m.params_mut().tensor_at_mut(1).data_mut()[0] = 0.0;
        EnergyModel::Mlp(m)
    }

    #[test]
    fn linear_energy_gradient_is_weight_vector() {
        let w = [1.0, 2.0, -0.5, 0.25];
        let model = linear_model(&w);
        let mut batch = BitBatch::new(4).unwrap();
        for idx in 0..16 {
            batch.push(&BitVector::from_index(4, idx).unwrap()).unwrap();
        }
        let g = model.grad_input(&batch).unwrap();
        for r in 0..16 {
            for i in 0..4 {
                assert!((g.data()[r * 4 + i] - w[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn neighbor_energies_two_bit_linear() {
        // E = x1 + 2 x2 at x = (0,0): flipping gives (1.0, 2.0)
        let model = linear_model(&[1.0, 2.0]);
        let x = BitVector::zeros(2).unwrap();
        let ne = model.neighbor_energies(&x).unwrap();
        assert!((ne[0] - 1.0).abs() < 1e-12);
        assert!((ne[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn neighbor_energies_match_direct_flip_energy() {
        let mut rng = RngStream::new(42, 0);
        let mlp = MlpEnergy::new(8, 12, 2, &mut rng).unwrap();
        let model = EnergyModel::Mlp(mlp);
        let mut sample_rng = RngStream::new(43, 1);
        for _ in 0..10 {
            let x = BitVector::random(8, &mut sample_rng).unwrap();
            let ne = model.neighbor_energies(&x).unwrap();
            for i in 0..8 {
                let direct = model.energy_one(&x.flipped(i)).unwrap();
                assert!((ne[i] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ising_neighbor_energies_match_direct_on_lattice() {
        let model = EnergyModel::Ising(
            IsingEnergy::cyclic_lattice(4, 0.25, Encoding::PlusMinusOne).unwrap(),
        );
        let mut rng = RngStream::new(5, 2);
        for _ in 0..50 {
            let x = BitVector::random(16, &mut rng).unwrap();
            let ne = model.neighbor_energies(&x).unwrap();
            for i in 0..16 {
                let direct = model.energy_one(&x.flipped(i)).unwrap();
                assert!((ne[i] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let model = linear_model(&[1.0, 2.0]);
        let bad = BitBatch::new(3).unwrap();
        assert!(model.energy_batch(&bad).is_err());
    }

    #[test]
    fn mlp_grad_input_matches_finite_differences() {
        use crate::tensor::finite_diff_grad;
        let mut rng = RngStream::new(9, 0);
        let mlp = MlpEnergy::new(6, 10, 2, &mut rng).unwrap();
        let model = EnergyModel::Mlp(mlp.clone());
        let x = BitVector::from_index(6, 0b101100).unwrap();
        let mut batch = BitBatch::new(6).unwrap();
        batch.push(&x).unwrap();
        let g = model.grad_input(&batch).unwrap();

        let point = batch.to_f64_matrix(Encoding::ZeroOne);
        let f = |t: &Tensor| Ok(mlp.forward_rows(t)?[0]);
        let fd = finite_diff_grad(f, &point, 1e-5).unwrap();
        let num: f64 = g
            .data()
            .iter()
            .zip(fd.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = fd.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / (den + 1e-12) < 1e-4, "rel err {}", num / (den + 1e-12));
    }
}
