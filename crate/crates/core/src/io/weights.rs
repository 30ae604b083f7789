//! CNNW binary weight files.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "CNNW" | version = 1 | tensor count
//! per tensor: name length | UTF-8 name | dtype (0 = f32) | ndim | dims... | f32 payload
//! ```
//!
//! Layer parameters are stored as `<layer>.weight` and `<layer>.bias`; conv
//! kernels are `(out, in, kh, kw)`, fc weights `(out, in)`. The optional
//! mean is `__mean__`, either `(3)` or `(3, H, W)`. Tensors are written in
//! byte order of their names, which makes encoding canonical.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::engine::{LayerWeights, WeightSet};
use crate::error::{Error, Result};
use crate::ops::{ConvWeights, FcWeights};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"CNNW";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;
pub const MEAN_NAME: &str = "__mean__";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WeightFormatError {
    #[error("bad magic {0:02x?}, expected \"CNNW\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated at byte {offset}: needed {needed} more bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: u64,
        available: usize,
    },
    #[error("tensor `{0}`: dimensions overflow")]
    DimOverflow(String),
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensor name at byte {0} is not valid UTF-8")]
    InvalidName(usize),
    #[error("tensor `{name}`: unsupported dtype {dtype}")]
    UnsupportedDtype { name: String, dtype: u32 },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("tensor `{name}`: {message}")]
    Layout { name: String, message: String },
}

/// Named tensors in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightFile {
    pub tensors: Vec<(String, Tensor)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: u64) -> Result<&'a [u8], WeightFormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available as u64 {
            return Err(WeightFormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n as usize];
        self.pos += n as usize;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, WeightFormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl WeightFile {
    pub fn decode(bytes: &[u8]) -> Result<Self, WeightFormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4).map_err(|_| {
            let mut m = [0u8; 4];
            m[..bytes.len()].copy_from_slice(bytes);
            WeightFormatError::BadMagic(m)
        })?;
        if magic != MAGIC {
            return Err(WeightFormatError::BadMagic([magic[0], magic[1], magic[2], magic[3]]));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(WeightFormatError::UnsupportedVersion(version));
        }
        let count = r.u32()?;
        let mut seen = HashSet::new();
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name_len = r.u32()?;
            let name_at = r.pos;
            let name = std::str::from_utf8(r.take(name_len as u64)?)
                .map_err(|_| WeightFormatError::InvalidName(name_at))?
                .to_string();
            let dtype = r.u32()?;
            if dtype != DTYPE_F32 {
                return Err(WeightFormatError::UnsupportedDtype { name, dtype });
            }
            let ndim = r.u32()?;
            let raw_dims = r.take(4 * ndim as u64)?;
            let dims: Vec<usize> = raw_dims
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
                .collect();
            let payload_bytes = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| WeightFormatError::DimOverflow(name.clone()))?;
            let payload = r.take(payload_bytes)?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if !seen.insert(name.clone()) {
                return Err(WeightFormatError::DuplicateName(name));
            }
            let tensor = Tensor::from_vec(&dims, data).expect("payload sized from dims");
            tensors.push((name, tensor));
        }
        let rest = bytes.len() - r.pos;
        if rest != 0 {
            return Err(WeightFormatError::TrailingBytes(rest));
        }
        Ok(Self { tensors })
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload: usize = self
            .tensors
            .iter()
            .map(|(n, t)| 16 + n.len() + 4 * t.rank() + 4 * t.len())
            .sum();
        let mut out = Vec::with_capacity(12 + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, tensor) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&DTYPE_F32.to_le_bytes());
            out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
            for &d in tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Builds the canonical (name-sorted) file for a weight set.
    pub fn from_weights(set: &WeightSet, mean: Option<&Tensor>) -> Self {
        let mut named = BTreeMap::new();
        for (layer, w) in set.iter() {
            let (weight, bias) = match w {
                LayerWeights::Conv(c) => (&c.kernels, &c.bias),
                LayerWeights::Fc(f) => (&f.weights, &f.bias),
            };
            named.insert(format!("{}.weight", layer), weight.clone());
            named.insert(format!("{}.bias", layer), bias.clone());
        }
        if let Some(mean) = mean {
            named.insert(MEAN_NAME.to_string(), mean.clone());
        }
        Self {
            tensors: named.into_iter().collect(),
        }
    }

    /// Groups `<layer>.weight` / `<layer>.bias` pairs into layer weights;
    /// rank-4 weights are conv kernels and rank-2 weights are fc matrices.
    pub fn into_weights(self) -> Result<(WeightSet, Option<Tensor>), WeightFormatError> {
        let layout = |name: &str, message: &str| WeightFormatError::Layout {
            name: name.to_string(),
            message: message.to_string(),
        };
        let mut mean = None;
        let mut pairs: BTreeMap<String, (Option<Tensor>, Option<Tensor>)> = BTreeMap::new();
        for (name, tensor) in self.tensors {
            if name == MEAN_NAME {
                if !matches!(tensor.rank(), 1 | 3) {
                    return Err(layout(&name, "mean must be (C) or (C, H, W)"));
                }
                mean = Some(tensor);
            } else if let Some(layer) = name.strip_suffix(".weight") {
                pairs.entry(layer.to_string()).or_default().0 = Some(tensor);
            } else if let Some(layer) = name.strip_suffix(".bias") {
                pairs.entry(layer.to_string()).or_default().1 = Some(tensor);
            } else {
                return Err(layout(&name, "expected `<layer>.weight`, `<layer>.bias` or `__mean__`"));
            }
        }
        let mut set = WeightSet::new();
        for (layer, pair) in pairs {
            let (Some(weight), Some(bias)) = pair else {
                return Err(layout(&layer, "needs both `.weight` and `.bias`"));
            };
            let entry = match weight.rank() {
                4 => ConvWeights::new(weight, bias).map(LayerWeights::Conv),
                2 => FcWeights::new(weight, bias).map(LayerWeights::Fc),
                _ => return Err(layout(&layer, "weights must be rank 4 (conv) or rank 2 (fc)")),
            }
            .map_err(|e| layout(&layer, &e.to_string()))?;
            set.insert(layer, entry);
        }
        Ok((set, mean))
    }
}

pub fn encode_weights(set: &WeightSet, mean: Option<&Tensor>) -> Vec<u8> {
    WeightFile::from_weights(set, mean).encode()
}

pub fn decode_weights(bytes: &[u8]) -> Result<(WeightSet, Option<Tensor>), WeightFormatError> {
    WeightFile::decode(bytes)?.into_weights()
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<(WeightSet, Option<Tensor>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_weights(&bytes)?)
}

pub fn write_weights(path: impl AsRef<Path>, set: &WeightSet, mean: Option<&Tensor>) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_weights(set, mean))
}
