//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "FRCK"
//! version u16      1
//! dtype   u8       1 = f32, 2 = f64
//! flags   u8       bit0 gate_enabled, bit1 has refiner head
//! config  u32 len + TOML bytes (ModelConfig echo)
//! count   u32      number of tensors
//! tensor  u16 name len + name, u8 trainable, u8 ndim, ndim x u32 dims,
//!         numel x dtype-width raw payload
//! ```
//!
//! Round-trips are bit-exact: payloads are the raw IEEE bits.

use std::path::Path;

use crate::error::{Error, Result};
use crate::hash::fnv1a64;
use crate::model::{build_network, DualHeadNetwork, ModelConfig};
use crate::nn::{InitScheme, InitSpec};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"FRCK";
const VERSION: u16 = 1;

/// Serialize a network and its config echo.
pub fn checkpoint_bytes<S: Scalar>(
    net: &DualHeadNetwork<S>,
    config: &ModelConfig,
) -> Result<Vec<u8>> {
    let config_toml = toml::to_string(config)
        .map_err(|e| Error::InvalidConfig(format!("config not serializable: {e}")))?;
    let tensors = net.named_tensors();

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(S::DTYPE);
    let mut flags = 0u8;
    if net.gate_enabled() {
        flags |= 1;
    }
    if net.fr_head.is_some() {
        flags |= 2;
    }
    out.push(flags);
    out.extend_from_slice(&(config_toml.len() as u32).to_le_bytes());
    out.extend_from_slice(config_toml.as_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in &tensors {
        let name = t.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(t.trainable as u8);
        let shape = t.tensor.shape();
        out.push(shape.len() as u8);
        for d in &shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in t.tensor.data().iter() {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

pub fn save<S: Scalar>(
    net: &DualHeadNetwork<S>,
    config: &ModelConfig,
    path: &Path,
) -> Result<()> {
    let bytes = checkpoint_bytes(net, config)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Fingerprint of a serialized network; equal weights give equal hashes.
pub fn checkpoint_hash<S: Scalar>(net: &DualHeadNetwork<S>, config: &ModelConfig) -> Result<u64> {
    Ok(fnv1a64(&checkpoint_bytes(net, config)?))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: std::path::PathBuf,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedPayload {
                path: self.path.clone(),
                expected_bytes: (self.pos + n) as u64,
                actual_bytes: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Load a checkpoint, rebuilding the network from the embedded config and
/// restoring every tensor bit-exactly.
pub fn load<S: Scalar>(path: &Path) -> Result<(DualHeadNetwork<S>, ModelConfig)> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0, path: path.to_path_buf() };

    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("bad magic {magic:02x?}"),
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("unsupported version {version}"),
        });
    }
    let dtype = r.u8()?;
    if dtype != S::DTYPE {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("dtype {dtype} does not match requested element type {}", S::DTYPE),
        });
    }
    let flags = r.u8()?;

    let config_len = r.u32()? as usize;
    let config_bytes = r.take(config_len)?;
    let config_str = std::str::from_utf8(config_bytes).map_err(|e| Error::CorruptHeader {
        path: path.to_path_buf(),
        detail: format!("config echo not utf-8: {e}"),
    })?;
    let config: ModelConfig = toml::from_str(config_str).map_err(|e| Error::CorruptHeader {
        path: path.to_path_buf(),
        detail: format!("config echo not parseable: {e}"),
    })?;

    let mut net: DualHeadNetwork<S> =
        build_network(&config, &InitSpec::new(InitScheme::Zeros, 0))?;
    net.set_gate(flags & 1 != 0);
    if ((flags & 2) != 0) != net.fr_head.is_some() {
        return Err(Error::CheckpointMismatch(
            "refiner-head flag disagrees with the config echo".into(),
        ));
    }

    let count = r.u32()? as usize;
    let named = net.named_tensors();
    if count != named.len() {
        return Err(Error::CheckpointMismatch(format!(
            "checkpoint stores {count} tensors, model has {}",
            named.len()
        )));
    }
    for expected in &named {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|e| Error::CheckpointMismatch(format!("tensor name not utf-8: {e}")))?
            .to_string();
        if name != expected.name {
            return Err(Error::CheckpointMismatch(format!(
                "tensor order mismatch: stored {name}, expected {}",
                expected.name
            )));
        }
        let _trainable = r.u8()?;
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        if shape != expected.tensor.shape() {
            return Err(Error::CheckpointMismatch(format!(
                "tensor {name}: stored shape {shape:?}, model expects {:?}",
                expected.tensor.shape()
            )));
        }
        let numel: usize = shape.iter().product();
        let payload = r.take(numel * S::BYTES)?;
        let values: Vec<S> =
            payload.chunks_exact(S::BYTES).map(|c| S::read_le(c)).collect();
        expected.tensor.set_data(&values);
    }
    Ok((net, config))
}
