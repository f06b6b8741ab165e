//! Model checkpoints: `"PKWM"`, version `u16`, the JSON model config, then
//! named tensors (name, shape, little-endian `f32` data).
//!
//! ```text
//! magic[4] version:u16 config_len:u32 config[config_len] tensor_count:u32
//! repeat: name_len:u16 name rank:u8 dims:u64*rank data:f32*prod(dims)
//! ```

use std::fs;
use std::path::Path;

use super::model::{build_model, Model, ModelConfig};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PKWM";
pub const VERSION: u16 = 1;

pub fn encode_checkpoint(model: &Model<f32>) -> Result<Vec<u8>> {
    let config = serde_json::to_vec(&model.config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let state = model.named_state();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(state.len() as u32).to_le_bytes());
    for (name, t) in state {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(err(self.pos, format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
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

fn err(offset: usize, reason: String) -> Error {
    Error::Checkpoint {
        offset: offset as u64,
        reason,
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model<f32>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(err(0, "bad magic (expected PKWM)".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let config_len = c.u32("config length")? as usize;
    let config_at = c.pos;
    let config: ModelConfig = serde_json::from_slice(c.take(config_len, "config")?)
        .map_err(|e| err(config_at, format!("bad model config: {e}")))?;
    let mut model = build_model::<f32>(&config).map_err(|e| err(config_at, format!("bad model config: {e}")))?;

    let count_at = c.pos;
    let count = c.u32("tensor count")? as usize;
    let mut state = model.named_state_mut();
    if count != state.len() {
        return Err(err(
            count_at,
            format!("checkpoint has {count} tensors, model expects {}", state.len()),
        ));
    }
    for (expected, target) in state.iter_mut() {
        let at = c.pos;
        let name_len = c.u16("tensor name length")? as usize;
        let name = c.take(name_len, "tensor name")?;
        if name != expected.as_bytes() {
            return Err(err(
                at,
                format!("expected tensor {expected}, found {}", String::from_utf8_lossy(name)),
            ));
        }
        let rank = c.take(1, "tensor rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u64("tensor dimension")? as usize);
        }
        if shape != target.shape() {
            return Err(err(
                at,
                format!("tensor {expected} has shape {shape:?}, model expects {:?}", target.shape()),
            ));
        }
        let raw = c.take(4 * target.len(), "tensor data")?;
        for (v, b) in target.data.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
    }
    if c.pos != bytes.len() {
        return Err(err(c.pos, "trailing bytes after last tensor".into()));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &Model<f32>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    decode_checkpoint(&fs::read(path)?)
}
