//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"RCAPCKPT"
//! u32     format version (currently 1)
//! u64     header length, then that many bytes of JSON holding the config
//!         echo and training metadata
//! u32     tensor count, then per tensor:
//!   u16   name length, name bytes (UTF-8)
//!   u8    rank, rank × u64 extents
//!   f32 × ∏extents payload
//! ```
//!
//! Loads are strict: wrong magic or version, malformed header, tensors out
//! of canonical order, shape drift, or trailing bytes all reject. Every
//! read is bounds-checked and payload allocations are capped by the bytes
//! actually present, so truncated or hostile buffers fail with an error
//! rather than a panic or an absurd allocation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::swin::config::SwinConfig;
use crate::swin::params::SwinParams;
use crate::tensor::Tensor;
use crate::Result;

const MAGIC: &[u8; 8] = b"RCAPCKPT";
const VERSION: u32 = 1;
const MAX_HEADER: usize = 1 << 20;
const MAX_NAME: usize = 512;
const MAX_RANK: usize = 8;
const MAX_TENSORS: usize = 1 << 16;

/// Training progress stored alongside the weights, echoed back on load so
/// a resumed run continues counting from the right epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Optimizer epochs completed when the snapshot was taken.
    pub epoch: usize,
    /// Seed the run was launched with.
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: SwinConfig,
    meta: CheckpointMeta,
}

/// Serializes weights and metadata to the on-disk byte layout.
pub fn encode(params: &SwinParams<f32>, meta: CheckpointMeta) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        config: params.config().clone(),
        meta,
    })
    .expect("header serialization is infallible");
    let payload: usize =
        params.tensors().iter().map(|t| t.len() * 4 + 64).sum();
    let mut out = Vec::with_capacity(header.len() + payload + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, tensor) in params.iter() {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Bounds-checked reader over the raw bytes.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated reading {what} at offset {} (wanted {n} bytes, \
                 {} left)",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Caps on the echoed config so registry arithmetic on hostile headers
/// cannot overflow; real configs sit far below them.
fn sane(cfg: &SwinConfig) -> Result<()> {
    let caps = [
        (cfg.input_size, 1usize << 14, "input_size"),
        (cfg.patch_size, 1 << 8, "patch_size"),
        (cfg.embed_dim, 1 << 12, "embed_dim"),
        (cfg.window_size, 1 << 10, "window_size"),
        (cfg.mlp_ratio, 64, "mlp_ratio"),
    ];
    for (value, cap, what) in caps {
        if value > cap {
            return Err(Error::Checkpoint(format!(
                "embedded config {what} = {value} exceeds the format cap {cap}"
            )));
        }
    }
    if cfg.depths.iter().any(|&d| d > 64) {
        return Err(Error::Checkpoint("embedded config depths exceed 64".into()));
    }
    Ok(())
}

/// Decodes a checkpoint from raw bytes. Total: never panics on any input.
pub fn decode(bytes: &[u8]) -> Result<(SwinParams<f32>, CheckpointMeta)> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let header_len = cur.u64("header length")? as usize;
    if header_len > MAX_HEADER {
        return Err(Error::Checkpoint(format!(
            "header length {header_len} exceeds the {MAX_HEADER} cap"
        )));
    }
    let header: Header = serde_json::from_slice(cur.take(header_len, "header")?)
        .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
    sane(&header.config)?;
    header.config.validate().map_err(|e| {
        Error::Checkpoint(format!("embedded config invalid: {e}"))
    })?;

    let count = cur.u32("tensor count")? as usize;
    if count > MAX_TENSORS {
        return Err(Error::Checkpoint(format!(
            "tensor count {count} exceeds the {MAX_TENSORS} cap"
        )));
    }
    let mut named = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let name_len = cur.u16("name length")? as usize;
        if name_len > MAX_NAME {
            return Err(Error::Checkpoint(format!(
                "tensor {i} name length {name_len} exceeds the {MAX_NAME} cap"
            )));
        }
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|_| {
                Error::Checkpoint(format!("tensor {i} name is not UTF-8"))
            })?
            .to_string();
        let rank = cur.u8("rank")? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Checkpoint(format!(
                "tensor {name} rank {rank} outside 1..={MAX_RANK}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut elems = 1usize;
        for _ in 0..rank {
            let d = cur.u64("extent")?;
            let d = usize::try_from(d).map_err(|_| {
                Error::Checkpoint(format!("tensor {name} extent {d} overflows"))
            })?;
            elems = elems.checked_mul(d).ok_or_else(|| {
                Error::Checkpoint(format!("tensor {name} element count overflows"))
            })?;
            shape.push(d);
        }
        // take() bounds the allocation by the bytes actually present.
        let raw = cur.take(elems * 4, "tensor payload")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        named.push((
            name.clone(),
            Tensor::from_vec(shape, data).map_err(|e| {
                Error::Checkpoint(format!("tensor {name}: {e}"))
            })?,
        ));
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - cur.pos
        )));
    }
    let params = SwinParams::from_tensors(&header.config, named)?;
    Ok((params, header.meta))
}

/// Writes a checkpoint file.
pub fn save(
    path: impl AsRef<Path>,
    params: &SwinParams<f32>,
    meta: CheckpointMeta,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(params, meta)).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint file; with `expected`, rejects a config mismatch so
/// a model never silently runs with weights from a different architecture.
pub fn load(
    path: impl AsRef<Path>,
    expected: Option<&SwinConfig>,
) -> Result<(SwinParams<f32>, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (params, meta) = decode(&bytes)?;
    if let Some(cfg) = expected {
        if params.config() != cfg {
            return Err(Error::Checkpoint(format!(
                "{} holds weights for a different model configuration",
                path.display()
            )));
        }
    }
    Ok((params, meta))
}
