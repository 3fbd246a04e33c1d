//! `DELT` tensors: magic, then K, H′, W′ as little-endian u32, then K·H′·W′ little-endian f32.

use std::path::Path;

use super::{read_bytes, write_bytes, IoError};
use crate::cam::{ClassWeights, FeatureMap};

const MAGIC: &[u8; 4] = b"DELT";
const HEADER: usize = 16;

pub fn encode_tensor(t: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 4 * t.data().len());
    out.extend_from_slice(MAGIC);
    for d in [t.channels(), t.height(), t.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<FeatureMap, IoError> {
    if bytes.len() < HEADER {
        return Err(IoError::schema(
            path,
            format!("tensor header truncated ({} bytes)", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(IoError::schema(path, "bad tensor magic, expected DELT"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (k, h, w) = (dim(0), dim(1), dim(2));
    let count = k
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| IoError::schema(path, "tensor dimensions overflow"))?;
    let payload = &bytes[HEADER..];
    if payload.len() != count * 4 {
        return Err(IoError::schema(
            path,
            format!(
                "header says {k}x{h}x{w} ({} bytes) but payload has {} bytes",
                count * 4,
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMap::new(k, h, w, data).map_err(|source| IoError::Tensor {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_tensor(path: &Path) -> Result<FeatureMap, IoError> {
    decode_tensor(&read_bytes(path)?, path)
}

pub fn save_tensor(path: &Path, t: &FeatureMap) -> Result<(), IoError> {
    write_bytes(path, &encode_tensor(t))
}

/// Class weights stored as a K×1×1 tensor.
pub fn load_weights(path: &Path) -> Result<ClassWeights, IoError> {
    let t = load_tensor(path)?;
    if t.height() != 1 || t.width() != 1 {
        return Err(IoError::schema(
            path,
            format!(
                "weights must be Kx1x1, got {}x{}x{}",
                t.channels(),
                t.height(),
                t.width()
            ),
        ));
    }
    ClassWeights::new(t.data().to_vec()).map_err(|source| IoError::Tensor {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_weights(path: &Path, w: &ClassWeights) -> Result<(), IoError> {
    let t = FeatureMap::new(w.len(), 1, 1, w.as_slice().to_vec()).map_err(|source| IoError::Tensor {
        path: path.to_path_buf(),
        source,
    })?;
    save_tensor(path, &t)
}
