//! Synthetic 2-D densities, Gray-code encoding to {0,1}^d, Ising data
//! generation from a fixed true model, and dataset persistence.

mod gray;
mod io;
mod synth;

pub use gray::GrayCodec;
pub use io::{load_dataset, save_dataset};
pub(crate) use io::{push_f64s, read_all, write_atomic, Reader};
pub use synth::{sample_2d, Synthetic2D, ALL_GENERATORS, RANGE_HI, RANGE_LO};

use crate::bits::{BitBatch, BitVector};
use crate::energy::{EnergyModel, IsingEnergy};
use crate::error::{CoreError, Result};
use crate::sampler::{gibbs_sample_set, streams, GibbsConfig, RngStream};

/// Ordered key=value metadata persisted with every dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    entries: Vec<(String, String)>,
}

impl DatasetManifest {
    pub fn new() -> DatasetManifest {
        DatasetManifest::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        debug_assert!(!value.contains('\n'));
        if let Some(slot) = self.entries.iter_mut().find(|(k, _)| *k == key) {
            slot.1 = value;
        } else {
            self.entries.push((key, value));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> DatasetManifest {
        let mut m = DatasetManifest::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                m.entries.push((k.to_string(), v.to_string()));
            }
        }
        m
    }
}

/// A dataset of binary rows plus its provenance manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct BitDataset {
    pub batch: BitBatch,
    pub manifest: DatasetManifest,
}

/// Recipe for an encoded synthetic dataset: d = 2 * codec.bits().
#[derive(Debug, Clone, Copy)]
pub struct Synthetic2DSpec {
    pub generator: Synthetic2D,
    pub n: usize,
    pub codec: GrayCodec,
}

/// Draw n 2-D points and Gray-encode each coordinate; the two codes are
/// concatenated into a d-bit row.
pub fn encode_dataset(spec: &Synthetic2DSpec, seed: u64) -> Result<BitDataset> {
    if spec.n == 0 {
        return Err(CoreError::InvalidArgument("n must be positive".into()));
    }
    let k = spec.codec.bits();
    let d = 2 * k;
    let mut rng = RngStream::new(seed, streams::DATA);
    let points = sample_2d(spec.generator, spec.n, &mut rng);
    let mut batch = BitBatch::with_capacity(d, spec.n)?;
    let mut row = BitVector::zeros(d)?;
    for (x, y) in points {
        let gx = spec.codec.float_to_gray(x);
        let gy = spec.codec.float_to_gray(y);
        for (i, &b) in gx.iter().chain(gy.iter()).enumerate() {
            row.set(i, b);
        }
        batch.push(&row)?;
    }
    let mut manifest = DatasetManifest::new();
    manifest.set("kind", "synthetic2d");
    manifest.set("generator", spec.generator.name());
    manifest.set("generator_params", spec.generator.constants());
    manifest.set("n", spec.n);
    manifest.set("bits_per_coordinate", k);
    manifest.set("lo", spec.codec.lo());
    manifest.set("hi", spec.codec.hi());
    manifest.set("quantization", "round-half-away-from-zero");
    manifest.set("seed", seed);
    Ok(BitDataset { batch, manifest })
}

/// Decode a row of an encoded 2-D dataset back to its two coordinates.
pub fn decode_row(codec: &GrayCodec, row: &BitVector) -> Result<(f64, f64)> {
    let k = codec.bits();
    if row.d() != 2 * k {
        return Err(CoreError::DimensionMismatch {
            expected: 2 * k,
            got: row.d(),
        });
    }
    let bits_x: Vec<bool> = (0..k).map(|i| row.get(i)).collect();
    let bits_y: Vec<bool> = (k..2 * k).map(|i| row.get(i)).collect();
    Ok((codec.gray_to_float(&bits_x)?, codec.gray_to_float(&bits_y)?))
}

/// Training data for coupling-recovery runs: Gibbs samples from the fixed
/// true model. The single-site step budget is converted to sweeps
/// (steps / d per chain) and split into burn-in plus thinning rounds.
pub fn gen_ising_data(
    true_model: &IsingEnergy,
    n: usize,
    steps: u64,
    chains: usize,
    seed: u64,
) -> Result<BitDataset> {
    if true_model.is_learnable() {
        return Err(CoreError::InvalidArgument(
            "data generation requires a fixed true model".into(),
        ));
    }
    if n == 0 || chains == 0 {
        return Err(CoreError::InvalidArgument(
            "n and chains must be positive".into(),
        ));
    }
    let d = true_model.dim();
    let sweeps_per_chain = (steps as usize).div_ceil(d).max(2);
    let rounds = n.div_ceil(chains);
    // default thinning of 10 sweeps, reduced when the step budget is small
    // so at least half of it is spent on burn-in
    let thin = (sweeps_per_chain / (2 * rounds)).clamp(1, 10);
    let burn_in = sweeps_per_chain.saturating_sub(thin * rounds).max(1);
    let cfg = GibbsConfig {
        chains,
        burn_in_sweeps: burn_in,
        thin_sweeps: thin,
    };
    let model = EnergyModel::Ising(true_model.clone());
    let batch = gibbs_sample_set(&model, n, &cfg, seed)?;
    let mut manifest = DatasetManifest::new();
    manifest.set("kind", "ising");
    manifest.set("n", n);
    manifest.set("d", d);
    manifest.set("sigma", true_model.sigma().unwrap_or(f64::NAN));
    if let Some(side) = true_model.side() {
        manifest.set("side", side);
    }
    manifest.set("encoding", true_model.encoding().name());
    manifest.set("steps", steps);
    manifest.set("chains", chains);
    manifest.set("burn_in_sweeps", burn_in);
    manifest.set("thin_sweeps", thin);
    manifest.set("seed", seed);
    Ok(BitDataset { batch, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::Encoding;
    use tempfile::tempdir;

    #[test]
    fn encode_dimensions() {
        let spec = Synthetic2DSpec {
            generator: Synthetic2D::TwoSpirals,
            n: 50,
            codec: GrayCodec::new(16, RANGE_LO, RANGE_HI).unwrap(),
        };
        let ds = encode_dataset(&spec, 3).unwrap();
        assert_eq!(ds.batch.d(), 32);
        assert_eq!(ds.batch.n(), 50);

        let wide = Synthetic2DSpec {
            codec: GrayCodec::new(128, RANGE_LO, RANGE_HI).unwrap(),
            n: 5,
            generator: Synthetic2D::TwoSpirals,
        };
        assert_eq!(encode_dataset(&wide, 3).unwrap().batch.d(), 256);
    }

    #[test]
    fn decode_lands_within_one_bin() {
        let codec = GrayCodec::new(12, RANGE_LO, RANGE_HI).unwrap();
        let spec = Synthetic2DSpec {
            generator: Synthetic2D::EightGaussians,
            n: 200,
            codec,
        };
        let seed = 9;
        let ds = encode_dataset(&spec, seed).unwrap();
        // regenerate the same points to compare against
        let mut rng = RngStream::new(seed, streams::DATA);
        let points = sample_2d(spec.generator, spec.n, &mut rng);
        let bin = codec.bin_width();
        for (r, (x, y)) in points.iter().enumerate() {
            let (dx, dy) = decode_row(&codec, &ds.batch.row(r)).unwrap();
            assert!((dx - x).abs() <= bin);
            assert!((dy - y).abs() <= bin);
        }
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let spec = Synthetic2DSpec {
            generator: Synthetic2D::Checkerboard,
            n: 77,
            codec: GrayCodec::new(9, RANGE_LO, RANGE_HI).unwrap(),
        };
        let ds = encode_dataset(&spec, 1234).unwrap();
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(ds, loaded);
        assert_eq!(loaded.manifest.get("generator"), Some("checkerboard"));
    }

    #[test]
    fn corrupted_magic_and_version_are_explicit_errors() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        let spec = Synthetic2DSpec {
            generator: Synthetic2D::Moons,
            n: 5,
            codec: GrayCodec::new(4, RANGE_LO, RANGE_HI).unwrap(),
        };
        let ds = encode_dataset(&spec, 5).unwrap();
        save_dataset(&ds, &path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(CoreError::Format(_))
        ));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'E';
        bytes[8] = 99; // version
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(CoreError::UnsupportedVersion { found: 99, .. })
        ));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_dataset(&path).is_err());
    }

    #[test]
    fn ising_data_generation_is_reproducible() {
        let model = IsingEnergy::cyclic_lattice(3, 0.25, Encoding::PlusMinusOne).unwrap();
        let a = gen_ising_data(&model, 20, 2000, 4, 77).unwrap();
        let b = gen_ising_data(&model, 20, 2000, 4, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.batch.n(), 20);
        assert_eq!(a.batch.d(), 9);
        assert_eq!(a.manifest.get("side"), Some("3"));
    }

    #[test]
    fn manifest_text_roundtrip() {
        let mut m = DatasetManifest::new();
        m.set("alpha", 1);
        m.set("beta", "two");
        m.set("alpha", 3); // overwrite keeps order
        let t = m.to_text();
        let back = DatasetManifest::from_text(&t);
        assert_eq!(m, back);
        assert_eq!(back.get("alpha"), Some("3"));
    }
}
