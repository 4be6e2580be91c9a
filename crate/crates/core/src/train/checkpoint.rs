//! Checkpoint container, version 1: a text manifest plus named raw f64
//! arrays.
//!
//! ```text
//! magic    8 bytes  "EBMCKPT\0"
//! version  u32 LE
//! manifest u32 LE length + UTF-8 "key=value" lines
//! count    u32 LE number of arrays
//! arrays   u16 LE name length + name, u64 LE element count, f64 LE data
//! ```
//!
//! Model-only files carry `format=model`; trainer checkpoints add optimizer
//! moments, iteration, rng positions, and the config hash under
//! `format=trainer`.

use crate::bits::Encoding;
use crate::data::{read_all, write_atomic, DatasetManifest};
use crate::energy::{EnergyModel, IsingEnergy, MlpEnergy};
use crate::error::{CoreError, Result};
use crate::tensor::{ParamSet, Tensor};
use std::path::Path;

pub(crate) const CHECKPOINT_MAGIC: [u8; 8] = *b"EBMCKPT\0";
pub(crate) const CHECKPOINT_VERSION: u32 = 1;

/// Raw decoded checkpoint: manifest plus named arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub manifest: DatasetManifest,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl Container {
    pub fn new(manifest: DatasetManifest) -> Container {
        Container {
            manifest,
            arrays: Vec::new(),
        }
    }

    pub fn push_array(&mut self, name: impl Into<String>, data: Vec<f64>) {
        self.arrays.push((name.into(), data));
    }

    pub fn array(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
            .ok_or_else(|| CoreError::Format(format!("missing array '{name}'")))
    }

    pub fn manifest_u64(&self, key: &str) -> Result<u64> {
        self.manifest_parse(key)
    }

    pub fn manifest_u128(&self, key: &str) -> Result<u128> {
        self.manifest_parse(key)
    }

    pub fn manifest_usize(&self, key: &str) -> Result<usize> {
        self.manifest_parse(key)
    }

    pub fn manifest_f64(&self, key: &str) -> Result<f64> {
        self.manifest_parse(key)
    }

    fn manifest_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.manifest
            .get(key)
            .ok_or_else(|| CoreError::Format(format!("missing manifest key '{key}'")))?
            .parse()
            .map_err(|_| CoreError::Format(format!("bad manifest value for '{key}'")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let manifest = self.manifest.to_text();
        let mut out = Vec::new();
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(manifest.as_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, data) in &self.arrays {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(data.len() as u64).to_le_bytes());
            crate::data::push_f64s(&mut out, data);
        }
        write_atomic(path, &out)
    }

    pub fn load(path: &Path) -> Result<Container> {
        let buf = read_all(path)?;
        let mut r = crate::data::Reader::new(&buf);
        let magic = r.bytes(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(CoreError::Format(format!(
                "bad checkpoint magic {magic:02x?}"
            )));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CoreError::UnsupportedVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        let mlen = r.u32()? as usize;
        let manifest = DatasetManifest::from_text(
            std::str::from_utf8(r.bytes(mlen)?)
                .map_err(|_| CoreError::Format("manifest is not UTF-8".into()))?,
        );
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = u16::from_le_bytes(r.bytes(2)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(r.bytes(nlen)?)
                .map_err(|_| CoreError::Format("array name is not UTF-8".into()))?
                .to_string();
            let elems = r.u64()? as usize;
            arrays.push((name, r.f64_slice(elems)?));
        }
        if !r.done() {
            return Err(CoreError::Format("trailing bytes in checkpoint".into()));
        }
        Ok(Container { manifest, arrays })
    }
}

/// Write model structure and parameters into a container.
pub(crate) fn encode_model(container: &mut Container, model: &EnergyModel) -> Result<()> {
    let m = &mut container.manifest;
    match model {
        EnergyModel::Mlp(mlp) => {
            m.set("model_kind", "mlp");
            m.set("dim", mlp.dim());
            m.set("width", mlp.width());
            m.set("depth", mlp.depth());
        }
        EnergyModel::Ising(ising) => {
            m.set("model_kind", "ising");
            m.set("dim", ising.dim());
            m.set("encoding", ising.encoding().name());
            m.set("learnable", ising.is_learnable());
            if let Some(sigma) = ising.sigma() {
                m.set("sigma", sigma);
                if let Some(side) = ising.side() {
                    m.set("side", side);
                }
                // adjacency rows let any fixed topology round-trip
                let j = ising.dense_coupling();
                let adjacency: Vec<f64> = j
                    .data()
                    .iter()
                    .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
                    .collect();
                container.push_array("adjacency", adjacency);
                container.push_array("fixed_bias", ising.bias_values());
                return Ok(());
            }
        }
    }
    for (name, t) in model.params().iter() {
        container.push_array(format!("param.{name}"), t.data().to_vec());
    }
    Ok(())
}

/// Rebuild a model from a container written by [`encode_model`].
pub(crate) fn decode_model(container: &Container) -> Result<EnergyModel> {
    let kind = container
        .manifest
        .get("model_kind")
        .ok_or_else(|| CoreError::Format("missing model_kind".into()))?;
    let dim = container.manifest_usize("dim")?;
    match kind {
        "mlp" => {
            let width = container.manifest_usize("width")?;
            let depth = container.manifest_usize("depth")?;
            let mut params = ParamSet::new();
            let mut fan_in = dim;
            for layer in 0..=depth {
                let out = if layer < depth { width } else { 1 };
                let w = container.array(&format!("param.w{layer}"))?;
                let b = container.array(&format!("param.b{layer}"))?;
                params.push(
                    format!("w{layer}"),
                    Tensor::from_vec(&[fan_in, out], w.to_vec())?,
                );
                params.push(format!("b{layer}"), Tensor::from_vec(&[out], b.to_vec())?);
                fan_in = out;
            }
            Ok(EnergyModel::Mlp(MlpEnergy::from_params(
                dim, width, depth, params,
            )?))
        }
        "ising" => {
            let encoding = Encoding::parse(
                container
                    .manifest
                    .get("encoding")
                    .ok_or_else(|| CoreError::Format("missing encoding".into()))?,
            )?;
            let learnable: bool = container.manifest_parse("learnable")?;
            if learnable {
                let u = container.array("param.j_upper")?;
                let b = container.array("param.bias")?;
                let mut params = ParamSet::new();
                params.push(
                    "j_upper",
                    Tensor::from_vec(&[dim * (dim - 1) / 2], u.to_vec())?,
                );
                params.push("bias", Tensor::from_vec(&[dim], b.to_vec())?);
                Ok(EnergyModel::Ising(IsingEnergy::learnable_from_params(
                    dim, encoding, params,
                )?))
            } else {
                let sigma = container.manifest_f64("sigma")?;
                let adjacency = container.array("adjacency")?;
                let bias = container.array("fixed_bias")?.to_vec();
                let side = container
                    .manifest
                    .get("side")
                    .map(|s| s.parse::<u32>())
                    .transpose()
                    .map_err(|_| CoreError::Format("bad side".into()))?;
                let j = Tensor::from_vec(&[dim, dim], adjacency.to_vec())?;
                Ok(EnergyModel::Ising(IsingEnergy::fixed_from_dense(
                    &j, sigma, bias, encoding, side,
                )?))
            }
        }
        other => Err(CoreError::Format(format!("unknown model kind '{other}'"))),
    }
}

/// Save just a model (no trainer state), e.g. a fixed true model.
pub fn save_model(model: &EnergyModel, path: &Path) -> Result<()> {
    let mut manifest = DatasetManifest::new();
    manifest.set("format", "model");
    let mut c = Container::new(manifest);
    encode_model(&mut c, model)?;
    c.save(path)
}

pub fn load_model(path: &Path) -> Result<EnergyModel> {
    let c = Container::load(path)?;
    match c.manifest.get("format") {
        Some("model") | Some("trainer") => decode_model(&c),
        other => Err(CoreError::Format(format!(
            "not a model checkpoint (format={other:?})"
        ))),
    }
}

/// FNV-1a, used to fingerprint configurations in checkpoints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::RngStream;
    use tempfile::tempdir;

    #[test]
    fn container_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.ckpt");
        let mut manifest = DatasetManifest::new();
        manifest.set("format", "model");
        manifest.set("note", "hello");
        let mut c = Container::new(manifest);
        c.push_array("a", vec![1.0, -2.5, 3.25]);
        c.push_array("b", vec![]);
        c.save(&path).unwrap();
        let back = Container::load(&path).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn mlp_model_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut rng = RngStream::new(3, 0);
        let model = EnergyModel::Mlp(MlpEnergy::new(7, 5, 2, &mut rng).unwrap());
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn fixed_and_learnable_ising_roundtrip() {
        let dir = tempdir().unwrap();
        let fixed =
            EnergyModel::Ising(IsingEnergy::cyclic_lattice(3, 0.25, Encoding::PlusMinusOne).unwrap());
        let p1 = dir.path().join("fixed.ckpt");
        save_model(&fixed, &p1).unwrap();
        assert_eq!(load_model(&p1).unwrap(), fixed);

        let mut learn = IsingEnergy::learnable(5, Encoding::ZeroOne).unwrap();
        learn.params_mut().tensor_at_mut(0).data_mut()[3] = 0.75;
        let learn = EnergyModel::Ising(learn);
        let p2 = dir.path().join("learn.ckpt");
        save_model(&learn, &p2).unwrap();
        assert_eq!(load_model(&p2).unwrap(), learn);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_model(Path::new("/nonexistent/x.ckpt"));
        assert!(matches!(err, Err(CoreError::Io { .. })));
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut rng = RngStream::new(3, 0);
        let model = EnergyModel::Mlp(MlpEnergy::new(3, 0, 0, &mut rng).unwrap());
        save_model(&model, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[3] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(&path), Err(CoreError::Format(_))));
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_ne!(fnv1a(b"config1"), fnv1a(b"config2"));
    }
}
