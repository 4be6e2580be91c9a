//! Evaluation metrics: linear-kernel MMD over bit vectors, coupling-recovery
//! RMSE, the full-objective evaluator, and energy-landscape grid export.

use crate::bits::{BitBatch, BitVector};
use crate::data::GrayCodec;
use crate::energy::EnergyModel;
use crate::error::{CoreError, Result};
use crate::rm::{batch_loss_with_plans, EstimatorKind, EstimatorSpec, SamplePlan};
use crate::tensor::Tensor;

/// k(x, y) = d - Hamming(x, y); the linear kernel on +-1 encodings up to an
/// affine transform.
pub fn hamming_kernel(x: &BitVector, y: &BitVector) -> Result<f64> {
    let h = x.hamming(y)?;
    Ok(x.d() as f64 - h as f64)
}

/// Squared MMD between two sample sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdReport {
    /// Biased V-statistic (diagonal terms included), so identical multisets
    /// score exactly zero. Nonnegative up to rounding.
    pub mmd_sq: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub kernel: &'static str,
}

/// Biased V-statistic MMD^2 = mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y),
/// all pairs including diagonals. Kernel sums are exact integers, so
/// identical sets cancel exactly.
pub fn mmd_linear(x: &BitBatch, y: &BitBatch) -> Result<MmdReport> {
    if x.d() != y.d() {
        return Err(CoreError::DimensionMismatch {
            expected: x.d(),
            got: y.d(),
        });
    }
    if x.is_empty() || y.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    let d = x.d() as u64;
    let sum_pairs = |a: &BitBatch, b: &BitBatch| -> u64 {
        let mut total: u64 = 0;
        for r in 0..a.n() {
            for s in 0..b.n() {
                total += d - a.hamming_rows(r, b, s) as u64;
            }
        }
        total
    };
    let sxx = sum_pairs(x, x) as f64 / (x.n() as f64 * x.n() as f64);
    let syy = sum_pairs(y, y) as f64 / (y.n() as f64 * y.n() as f64);
    let sxy = sum_pairs(x, y) as f64 / (x.n() as f64 * y.n() as f64);
    Ok(MmdReport {
        mmd_sq: sxx + syy - 2.0 * sxy,
        n_x: x.n(),
        n_y: y.n(),
        kernel: "d - HammingDistance",
    })
}

/// Root-mean-squared error over all d^2 entries of two coupling matrices.
pub fn rmse_connectivity(j_hat: &Tensor, j_true: &Tensor) -> Result<f64> {
    if j_hat.shape() != j_true.shape() {
        return Err(CoreError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            j_hat.shape(),
            j_true.shape()
        )));
    }
    let n = j_hat.len() as f64;
    let sq: f64 = j_hat
        .data()
        .iter()
        .zip(j_true.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / n).sqrt())
}

/// Mean full ratio-matching objective over a sample set; the common yardstick
/// for comparing estimators trained on the same data.
pub fn objective_value_eval(model: &EnergyModel, samples: &BitBatch, clamp: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    let d = model.dim();
    let spec = EstimatorSpec::new(EstimatorKind::RmFull, 0).with_clamp(clamp);
    let plans: Vec<SamplePlan> = (0..samples.n())
        .map(|_| SamplePlan {
            indices: (0..d).collect(),
            weights: vec![1.0; d],
        })
        .collect();
    Ok(batch_loss_with_plans(model, samples, &spec, &plans)?.value)
}

/// A uniform grid over 2-D space with one model energy per point.
#[derive(Debug, Clone)]
pub struct LandscapeGrid {
    pub resolution: usize,
    /// Row-major (x, y) coordinates; resolution^2 entries.
    pub points: Vec<(f64, f64)>,
    pub energies: Vec<f64>,
}

impl LandscapeGrid {
    /// Text table: header plus one `x,y,energy` row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 32);
        out.push_str("x,y,energy\n");
        for ((x, y), e) in self.points.iter().zip(self.energies.iter()) {
            out.push_str(&format!("{x},{y},{e}\n"));
        }
        out
    }
}

/// Encode every point of a resolution^2 grid over the codec's range and
/// score it with the model. Deterministic; no randomness involved.
pub fn energy_landscape(
    model: &EnergyModel,
    codec: &GrayCodec,
    resolution: usize,
) -> Result<LandscapeGrid> {
    if resolution == 0 {
        return Err(CoreError::InvalidArgument("resolution must be positive".into()));
    }
    let d = 2 * codec.bits();
    if model.dim() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: model.dim(),
        });
    }
    let (lo, hi) = (codec.lo(), codec.hi());
    let step = (hi - lo) / resolution as f64;
    let mut points = Vec::with_capacity(resolution * resolution);
    let mut batch = BitBatch::with_capacity(d, resolution * resolution)?;
    let mut row = BitVector::zeros(d)?;
    for yi in 0..resolution {
        let y = lo + (yi as f64 + 0.5) * step;
        for xi in 0..resolution {
            let x = lo + (xi as f64 + 0.5) * step;
            points.push((x, y));
            let gx = codec.float_to_gray(x);
            let gy = codec.float_to_gray(y);
            for (i, &b) in gx.iter().chain(gy.iter()).enumerate() {
                row.set(i, b);
            }
            batch.push(&row)?;
        }
    }
    let energies = model.energy_batch(&batch)?;
    Ok(LandscapeGrid {
        resolution,
        points,
        energies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{RANGE_HI, RANGE_LO};
    use crate::energy::MlpEnergy;
    use crate::rm::{rm_full_loss, DEFAULT_EXPONENT_CLAMP};
    use crate::sampler::RngStream;

    fn batch_from_indices(d: usize, idx: &[usize]) -> BitBatch {
        let mut b = BitBatch::new(d).unwrap();
        for &i in idx {
            b.push(&BitVector::from_index(d, i).unwrap()).unwrap();
        }
        b
    }

    #[test]
    fn kernel_values() {
        let x = BitVector::from_index(4, 0b0101).unwrap();
        assert_eq!(hamming_kernel(&x, &x).unwrap(), 4.0);
        let y = BitVector::from_index(4, 0b1010).unwrap();
        assert_eq!(hamming_kernel(&x, &y).unwrap(), 0.0);
        let z = BitVector::from_index(4, 0b0111).unwrap();
        assert_eq!(hamming_kernel(&x, &z).unwrap(), 3.0);
        let w = BitVector::from_index(5, 0).unwrap();
        assert!(hamming_kernel(&x, &w).is_err());
    }

    #[test]
    fn kernel_matches_naive_bit_loop() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..50 {
            let x = BitVector::random(19, &mut rng).unwrap();
            let y = BitVector::random(19, &mut rng).unwrap();
            let mut same = 0;
            for i in 0..19 {
                if x.get(i) == y.get(i) {
                    same += 1;
                }
            }
            assert_eq!(hamming_kernel(&x, &y).unwrap(), same as f64);
        }
    }

    #[test]
    fn mmd_identical_sets_is_exactly_zero() {
        let x = batch_from_indices(6, &[1, 5, 9, 33, 12]);
        let r = mmd_linear(&x, &x.clone()).unwrap();
        assert_eq!(r.mmd_sq, 0.0);
    }

    #[test]
    fn mmd_hand_computed_case() {
        // X = two all-zeros, Y = two all-ones, d = 4:
        // mean kXX = 4, mean kYY = 4, mean kXY = 0 -> MMD^2 = 8
        let x = batch_from_indices(4, &[0, 0]);
        let y = batch_from_indices(4, &[15, 15]);
        let r = mmd_linear(&x, &y).unwrap();
        assert_eq!(r.mmd_sq, 8.0);
    }

    #[test]
    fn mmd_symmetric_and_permutation_invariant() {
        let x = batch_from_indices(5, &[3, 7, 21, 9]);
        let y = batch_from_indices(5, &[1, 30, 14]);
        let a = mmd_linear(&x, &y).unwrap().mmd_sq;
        let b = mmd_linear(&y, &x).unwrap().mmd_sq;
        assert!((a - b).abs() < 1e-12);
        let xp = batch_from_indices(5, &[9, 3, 21, 7]);
        let c = mmd_linear(&xp, &y).unwrap().mmd_sq;
        assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn rmse_values() {
        let a = Tensor::from_vec(&[3, 3], vec![0.0; 9]).unwrap();
        assert_eq!(rmse_connectivity(&a, &a).unwrap(), 0.0);
        let b = Tensor::from_vec(&[3, 3], vec![0.1; 9]).unwrap();
        assert!((rmse_connectivity(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        let c = Tensor::from_vec(&[2, 2], vec![0.0; 4]).unwrap();
        assert!(rmse_connectivity(&a, &c).is_err());
    }

    #[test]
    fn objective_eval_matches_mean_of_single_losses() {
        let mut rng = RngStream::new(17, 0);
        let model = EnergyModel::Mlp(MlpEnergy::new(6, 8, 2, &mut rng).unwrap());
        let samples = batch_from_indices(6, &[0, 9, 33, 62, 17]);
        let v = objective_value_eval(&model, &samples, DEFAULT_EXPONENT_CLAMP).unwrap();
        let mut mean = 0.0;
        for r in 0..samples.n() {
            mean += rm_full_loss(&model, &samples.row(r), DEFAULT_EXPONENT_CLAMP)
                .unwrap()
                .value;
        }
        mean /= samples.n() as f64;
        assert!((v - mean).abs() < 1e-10);

        // single-sample batch equals the single loss
        let one = batch_from_indices(6, &[9]);
        let v1 = objective_value_eval(&model, &one, DEFAULT_EXPONENT_CLAMP).unwrap();
        let s1 = rm_full_loss(&model, &one.row(0), DEFAULT_EXPONENT_CLAMP).unwrap();
        assert!((v1 - s1.value).abs() < 1e-10);
    }

    #[test]
    fn objective_eval_constant_model_is_d() {
        let mut rng = RngStream::new(1, 0);
        let mut m = MlpEnergy::new(5, 0, 0, &mut rng).unwrap();
        for v in m.params_mut().tensor_at_mut(0).data_mut() {
            *v = 0.0;
        }
        let model = EnergyModel::Mlp(m);
        let samples = batch_from_indices(5, &[0, 7, 31]);
        let v = objective_value_eval(&model, &samples, DEFAULT_EXPONENT_CLAMP).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn landscape_grid_shape_and_determinism() {
        let codec = GrayCodec::new(4, RANGE_LO, RANGE_HI).unwrap();
        let mut rng = RngStream::new(5, 0);
        let model = EnergyModel::Mlp(MlpEnergy::new(8, 6, 1, &mut rng).unwrap());
        let g1 = energy_landscape(&model, &codec, 10).unwrap();
        assert_eq!(g1.points.len(), 100);
        assert_eq!(g1.energies.len(), 100);
        let g2 = energy_landscape(&model, &codec, 10).unwrap();
        assert_eq!(g1.to_csv(), g2.to_csv());
        assert!(energy_landscape(&model, &codec, 0).is_err());

        let bad_codec = GrayCodec::new(5, RANGE_LO, RANGE_HI).unwrap();
        assert!(energy_landscape(&model, &bad_codec, 4).is_err());
    }
}
