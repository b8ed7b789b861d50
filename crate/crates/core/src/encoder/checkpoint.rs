//! Binary tensor container.
//!
//! Layout: the 8-byte magic `EQVRCKPT`, a little-endian `u32` format
//! version, a little-endian `u64` header length, a UTF-8 JSON header
//! `{"meta": .., "tensors": [{"name", "shape"}, ..]}`, then every tensor's
//! data as little-endian `f64` in header order, row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 8] = b"EQVRCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: &str, shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { name: name.to_string(), shape, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("missing tensor `{0}`")]
    Missing(String),
    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    Shape { name: String, found: Vec<usize>, expected: Vec<usize> },
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            meta: self.meta.clone(),
            tensors: self.tensors.iter().map(|t| Entry { name: t.name.clone(), shape: t.shape.clone() }).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let floats: usize = self.tensors.iter().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            for x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let bad = |m: &str| CheckpointError::Format(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes.get(20..20 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        let mut pos = 20 + hlen;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            let raw = bytes.get(pos..pos + 8 * n).ok_or_else(|| bad("truncated data"))?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            pos += 8 * n;
            tensors.push(Tensor { name: e.name, shape: e.shape, data });
        }
        if pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Container { meta: header.meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_bytes())
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path)
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_bytes(&bytes)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, CheckpointError> {
        self.tensors.iter().find(|t| t.name == name).ok_or_else(|| CheckpointError::Missing(name.to_string()))
    }

    /// Data of `name`, checked against `shape`.
    pub fn take(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>, CheckpointError> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(CheckpointError::Shape {
                name: name.to_string(),
                found: t.shape.clone(),
                expected: shape.to_vec(),
            });
        }
        Ok(t.data.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_roundtrip_bitwise() {
        let c = Container {
            meta: serde_json::json!({"kind": "test", "n": 2}),
            tensors: vec![
                Tensor::new("a", vec![2, 2], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300]),
                Tensor::new("b", vec![0], vec![]),
            ],
        };
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back.meta, c.meta);
        let bits = |t: &Tensor| t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.tensors[0]), bits(&c.tensors[0]));
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Container::from_bytes(b"nope").is_err());
        assert!(matches!(back.take("a", &[4]), Err(CheckpointError::Shape { .. })));
    }
}
