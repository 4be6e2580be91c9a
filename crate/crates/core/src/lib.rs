//! Training energy-based models on d-dimensional binary data with ratio
//! matching and gradient-guided importance sampling.
//!
//! The pieces, bottom up:
//! - [`tensor`]: dense f64 arrays, a small reverse-mode tape, Adam, and a
//!   finite-difference oracle.
//! - [`bits`]: packed points in {0,1}^d.
//! - [`energy`]: MLP and lattice-coupling (Ising) energy functions with
//!   batched evaluation, input gradients, and flip-neighbor energies.
//! - [`rm`]: the ratio-matching loss family and its importance-sampled
//!   estimators, plus the proposal constructions.
//! - [`sampler`]: seeded rng streams, categorical sampling, Gibbs sampling.
//! - [`data`]: synthetic 2-D densities, Gray-code quantization, dataset
//!   files.
//! - [`metrics`]: Hamming-kernel MMD, coupling-recovery RMSE, objective
//!   evaluation, energy landscape grids.
//! - [`train`]: the training loop with checkpointing and evaluation hooks.

pub mod bits;
pub mod data;
pub mod energy;
pub mod error;
pub mod metrics;
pub mod rm;
pub mod sampler;
pub mod tensor;
pub mod train;

pub use bits::{BitBatch, BitVector, Encoding};
pub use energy::{EnergyModel, IsingEnergy, MlpEnergy};
pub use error::{CoreError, Result};
pub use rm::{EstimatorKind, EstimatorSpec, LossValue, ProposalDistribution};
pub use sampler::RngStream;
pub use tensor::{GradRecord, ParamSet, Tensor};
