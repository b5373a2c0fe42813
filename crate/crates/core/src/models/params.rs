//! Named parameter storage and the CMTW weight file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CMTW" | u32 version = 1 | u32 tensor count
//! per tensor: u32 name length | UTF-8 name | u32 ndim | ndim × u32 dims | values as f32
//! ```
//!
//! Values are held as `f64` in memory and narrowed to `f32` on save.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result, WeightsError};
use crate::tensor::Tensor;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"CMTW";
pub const WEIGHTS_VERSION: u32 = 1;

/// Ordered map from dot-separated parameter path to tensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor under a new, non-empty name.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<(), WeightsError> {
        let name = name.into();
        if name.is_empty() {
            return Err(WeightsError::EmptyName);
        }
        if self.tensors.contains_key(&name) {
            return Err(WeightsError::DuplicateName(name));
        }
        self.tensors.insert(name, t.with_requires_grad(false));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    /// Looks up a tensor the model definition depends on.
    pub(crate) fn expect(&self, name: &str) -> Result<&Tensor> {
        self.tensors.get(name).ok_or_else(|| Error::InvalidArgument(format!("parameter `{name}` is missing")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, WeightsError> {
        let mut out = Vec::new();
        out.extend_from_slice(&WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            if name.is_empty() {
                return Err(WeightsError::EmptyName);
            }
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightsError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != WEIGHTS_MAGIC {
            return Err(WeightsError::BadMagic(magic));
        }
        let version = r.u32("version")?;
        if version != WEIGHTS_VERSION {
            return Err(WeightsError::UnsupportedVersion(version));
        }
        let count = r.u32("tensor count")?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name_len = r.u32("name length")? as usize;
            let name =
                std::str::from_utf8(r.take(name_len, "name")?).map_err(|_| WeightsError::InvalidName)?.to_string();
            if name.is_empty() {
                return Err(WeightsError::EmptyName);
            }
            let ndim = r.u32("ndim")? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(r.u32("dims")? as usize);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| WeightsError::InvalidShape(name.clone()))?;
            let raw =
                r.take(numel.checked_mul(4).ok_or_else(|| WeightsError::InvalidShape(name.clone()))?, "values")?;
            let data =
                raw.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes")))).collect();
            let t = Tensor::new(shape, data).map_err(|_| WeightsError::InvalidShape(name.clone()))?;
            store.insert(name, t)?;
        }
        if r.pos != bytes.len() {
            return Err(WeightsError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(store)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WeightsError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(WeightsError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WeightsError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn save_weights(store: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    let bytes = store.to_bytes()?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ParamStore> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(ParamStore::from_bytes(&bytes)?)
}
