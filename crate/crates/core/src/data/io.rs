//! Dataset file format, version 1:
//!
//! ```text
//! magic    8 bytes  "EBMDATA\0"
//! version  u32 LE
//! d        u32 LE
//! n        u64 LE
//! rows     n * ceil(d/8) bytes, bit i of a row at byte i/8, bit i%8
//! manifest u32 LE length + UTF-8 "key=value" lines
//! ```
//!
//! Files are written atomically (temp file in the same directory, then
//! rename).

use super::{BitDataset, DatasetManifest};
use crate::bits::{BitBatch, BitVector};
use crate::error::{CoreError, Result};
use std::io::{Read, Write};
use std::path::Path;

pub(crate) const DATASET_MAGIC: [u8; 8] = *b"EBMDATA\0";
pub(crate) const DATASET_VERSION: u32 = 1;

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CoreError::io(path.display().to_string(), e)
    })
}

pub(crate) fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    Ok(buf)
}

/// Cursor over a byte buffer with truncation-checked reads.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Reader<'a> {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(CoreError::Format(format!(
                "truncated file: wanted {n} bytes at offset {}, have {}",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64_slice(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.bytes(count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub(crate) fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialize a dataset to the on-disk layout.
pub fn save_dataset(dataset: &BitDataset, path: &Path) -> Result<()> {
    let batch = &dataset.batch;
    let d = batch.d();
    let n = batch.n();
    let bytes_per_row = d.div_ceil(8);
    let mut out = Vec::with_capacity(8 + 4 + 4 + 8 + n * bytes_per_row + 256);
    out.extend_from_slice(&DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for r in 0..n {
        let mut row = vec![0u8; bytes_per_row];
        for i in 0..d {
            if batch.get(r, i) {
                row[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    let manifest = dataset.manifest.to_text();
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    write_atomic(path, &out)
}

pub fn load_dataset(path: &Path) -> Result<BitDataset> {
    let buf = read_all(path)?;
    let mut r = Reader::new(&buf);
    let magic = r.bytes(8)?;
    if magic != DATASET_MAGIC {
        return Err(CoreError::Format(format!(
            "bad dataset magic {magic:02x?}"
        )));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(CoreError::UnsupportedVersion {
            found: version,
            supported: DATASET_VERSION,
        });
    }
    let d = r.u32()? as usize;
    let n = r.u64()? as usize;
    if d == 0 {
        return Err(CoreError::Format("dataset dimension is zero".into()));
    }
    let bytes_per_row = d.div_ceil(8);
    let mut batch = BitBatch::with_capacity(d, n)?;
    for _ in 0..n {
        let raw = r.bytes(bytes_per_row)?;
        let mut row = BitVector::zeros(d)?;
        for i in 0..d {
            if raw[i / 8] >> (i % 8) & 1 == 1 {
                row.set(i, true);
            }
        }
        batch.push(&row)?;
    }
    let mlen = r.u32()? as usize;
    let manifest = DatasetManifest::from_text(
        std::str::from_utf8(r.bytes(mlen)?)
            .map_err(|_| CoreError::Format("manifest is not UTF-8".into()))?,
    );
    if !r.done() {
        return Err(CoreError::Format("trailing bytes after manifest".into()));
    }
    Ok(BitDataset { batch, manifest })
}
