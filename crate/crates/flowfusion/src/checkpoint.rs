//! Fusion network checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! | size        | field                                              |
//! |-------------|----------------------------------------------------|
//! | 8           | magic `FFNET\0\0\0`                                |
//! | 4           | `u32` format version (1)                           |
//! | 4           | `u32` byte length `L` of the configuration          |
//! | L           | UTF-8 TOML: `frame_channels`, `[input]`, `[train]` |
//! | 4           | `u32` tensor count                                  |
//!
//! followed, per tensor, by a `u32` name length, the UTF-8 name, a `u32`
//! rank `r`, `r` `u64` dimensions and the `f64` values in row-major order.

use std::fs;
use std::path::Path;

use flowfusion_core::autodiff::Tensor;
use flowfusion_core::fusion::{FusionInputConfig, FusionNet, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"FFNET\0\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub frame_channels: usize,
    pub input: FusionInputConfig,
    pub train: TrainConfig,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Config(format!("{v} does not fit the checkpoint header")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint(net: &FusionNet, train: &TrainConfig) -> Result<Vec<u8>> {
    let meta = CheckpointMeta {
        frame_channels: net.frame_channels(),
        input: *net.input_config(),
        train: train.clone(),
    };
    let config = toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(64 + config.len() + 8 * net.num_parameters());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, config.len())?;
    out.extend_from_slice(config.as_bytes());
    put_u32(&mut out, net.params().len())?;
    for (name, t) in net.named_params() {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len())?;
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint {
                path: self.path.into(),
                detail: format!("truncated at byte {} (wanted {n} more)", self.pos),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| self.err(format!("dimension {v} is too large")))
    }

    fn str(&mut self, n: usize) -> Result<&'a str> {
        let b = self.take(n)?;
        std::str::from_utf8(b).map_err(|_| self.err("invalid UTF-8".into()))
    }

    fn err(&self, detail: String) -> Error {
        Error::Checkpoint {
            path: self.path.into(),
            detail,
        }
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<(FusionNet, CheckpointMeta)> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        return Err(r.err("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let n = r.u32()?;
    let config = r.str(n)?;
    let meta: CheckpointMeta = toml::from_str(config).map_err(|e| r.err(format!("configuration: {e}")))?;
    let count = r.u32()?;
    let mut named = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let n = r.u32()?;
        let name = r.str(n)?.to_string();
        let rank = r.u32()?;
        if rank > 8 {
            return Err(r.err(format!("tensor `{name}` has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| r.err(format!("tensor `{name}` is too large")))?;
        let raw = r.take(len.checked_mul(8).ok_or_else(|| r.err("tensor too large".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        named.push((name, Tensor::from_vec(&shape, data)?));
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let net = FusionNet::from_params(meta.input, meta.frame_channels, named).map_err(|e| r.err(e.to_string()))?;
    Ok((net, meta))
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &FusionNet, train: &TrainConfig) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(net, train)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(FusionNet, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
