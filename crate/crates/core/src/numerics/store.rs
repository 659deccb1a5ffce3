//! Single-file tensor checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SPPT" | version u32 = 1 | tensor_count u32
//! per tensor:
//!   name_len u32 | name (UTF-8) | ndim u32 | dims (u64 each)
//!   dtype u8 (1 = f64, 2 = f32, 3 = u8) | payload (row-major, little-endian)
//! ```
//!
//! JSON metadata rides inside the store as a `u8` tensor named [`META_TENSOR`].

use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Result, SppError};
use crate::numerics::Matrix;

pub const MAGIC: &[u8; 4] = b"SPPT";
pub const VERSION: u32 = 1;
pub const META_TENSOR: &str = "__meta__";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F64,
    F32,
    U8,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F64 => 1,
            DType::F32 => 2,
            DType::U8 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::F64),
            2 => Some(DType::F32),
            3 => Some(DType::U8),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::F64 => 8,
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub dtype: DType,
    pub payload: Vec<u8>,
}

impl Tensor {
    pub fn element_count(&self) -> u64 {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TensorStore {
    entries: Vec<Tensor>,
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|t| t.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|t| t.name == name)
    }

    fn validate(tensor: &Tensor) -> Result<()> {
        let expected = tensor.element_count() * tensor.dtype.width() as u64;
        if tensor.payload.len() as u64 != expected {
            return Err(SppError::argument(format!(
                "tensor `{}`: payload is {} bytes, dims need {expected}",
                tensor.name,
                tensor.payload.len()
            )));
        }
        Ok(())
    }

    /// Appends a tensor. Names must be unique and the payload must match the dims.
    pub fn push(&mut self, tensor: Tensor) -> Result<()> {
        if self.contains(&tensor.name) {
            return Err(SppError::argument(format!(
                "duplicate tensor name `{}`",
                tensor.name
            )));
        }
        Self::validate(&tensor)?;
        self.entries.push(tensor);
        Ok(())
    }

    /// Inserts a tensor, replacing any existing one of the same name in place.
    pub fn upsert(&mut self, tensor: Tensor) -> Result<()> {
        Self::validate(&tensor)?;
        match self.entries.iter().position(|t| t.name == tensor.name) {
            Some(pos) => self.entries[pos] = tensor,
            None => self.entries.push(tensor),
        }
        Ok(())
    }

    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let pos = self.entries.iter().position(|t| t.name == name)?;
        Some(self.entries.remove(pos))
    }

    pub fn put_matrix(&mut self, name: &str, m: &Matrix) -> Result<()> {
        let mut payload = Vec::with_capacity(m.len() * 8);
        for v in m.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        self.upsert(Tensor {
            name: name.to_string(),
            dims: vec![m.rows() as u64, m.cols() as u64],
            dtype: DType::F64,
            payload,
        })
    }

    pub fn put_matrix_f32(&mut self, name: &str, m: &Matrix) -> Result<()> {
        let mut payload = Vec::with_capacity(m.len() * 4);
        for v in m.iter() {
            payload.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        self.upsert(Tensor {
            name: name.to_string(),
            dims: vec![m.rows() as u64, m.cols() as u64],
            dtype: DType::F32,
            payload,
        })
    }

    /// Stores a 0/1 matrix as `u8`. Any entry other than exactly 0 or 1 is rejected.
    pub fn put_binary(&mut self, name: &str, m: &Matrix) -> Result<()> {
        let mut payload = Vec::with_capacity(m.len());
        for (idx, &v) in m.iter().enumerate() {
            payload.push(match v {
                v if v == 0.0 => 0u8,
                v if v == 1.0 => 1u8,
                other => {
                    return Err(SppError::argument(format!(
                        "tensor `{name}`: non-binary value {other} at index {idx}"
                    )))
                }
            });
        }
        self.upsert(Tensor {
            name: name.to_string(),
            dims: vec![m.rows() as u64, m.cols() as u64],
            dtype: DType::U8,
            payload,
        })
    }

    /// Reads a 2-D tensor of any dtype as an `f64` matrix.
    pub fn matrix(&self, name: &str) -> Result<Matrix> {
        let t = self
            .get(name)
            .ok_or_else(|| SppError::MissingTensor(name.to_string()))?;
        if t.dims.len() != 2 {
            return Err(SppError::shape(format!(
                "tensor `{name}` has {} dims, expected 2",
                t.dims.len()
            )));
        }
        let (rows, cols) = (t.dims[0] as usize, t.dims[1] as usize);
        let data: Vec<f64> = match t.dtype {
            DType::F64 => t
                .payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
            DType::F32 => t
                .payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
                .collect(),
            DType::U8 => t.payload.iter().map(|&b| b as f64).collect(),
        };
        Matrix::new(rows, cols, data).map_err(|e| match e {
            SppError::Argument(msg) => SppError::argument(format!("tensor `{name}`: {msg}")),
            other => other,
        })
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec(value)
            .map_err(|e| SppError::Meta(format!("serialising `{name}`: {e}")))?;
        self.upsert(Tensor {
            name: name.to_string(),
            dims: vec![bytes.len() as u64],
            dtype: DType::U8,
            payload: bytes,
        })
    }

    pub fn json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let t = self
            .get(name)
            .ok_or_else(|| SppError::MissingTensor(name.to_string()))?;
        if t.dtype != DType::U8 {
            return Err(SppError::Meta(format!("`{name}` is not a u8 tensor")));
        }
        serde_json::from_slice(&t.payload)
            .map_err(|e| SppError::Meta(format!("parsing `{name}`: {e}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for t in &self.entries {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            out.push(t.dtype.code());
            out.extend_from_slice(&t.payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(cur.error_at(0, format!("bad magic {magic:?}, expected \"SPPT\"")));
        }
        let version_at = cur.pos;
        let version = cur.u32("version")?;
        if version != VERSION {
            return Err(cur.error_at(version_at, format!("unsupported version {version}")));
        }
        let count = cur.u32("tensor count")?;
        let mut store = TensorStore::new();
        for idx in 0..count {
            let start = cur.pos;
            let name_len = cur.u32("name length")? as usize;
            let name_bytes = cur.take(name_len, &format!("name of tensor #{idx}"))?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| cur.error_at(start + 4, format!("tensor #{idx}: name is not UTF-8")))?
                .to_string();
            let ndim = cur.u32(&format!("ndim of `{name}`"))?;
            let mut dims = Vec::with_capacity(ndim as usize);
            for _ in 0..ndim {
                dims.push(cur.u64(&format!("dims of `{name}`"))?);
            }
            let dtype_at = cur.pos;
            let code = cur.take(1, &format!("dtype of `{name}`"))?[0];
            let dtype = DType::from_code(code).ok_or_else(|| {
                cur.error_at(
                    dtype_at,
                    format!("tensor `{name}`: unknown dtype code {code}"),
                )
            })?;
            let len = dims
                .iter()
                .try_fold(dtype.width() as u64, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| cur.error_at(dtype_at, format!("tensor `{name}`: size overflow")))?;
            let payload = cur
                .take(len as usize, &format!("payload of tensor `{name}`"))?
                .to_vec();
            if store.contains(&name) {
                return Err(cur.error_at(start, format!("duplicate tensor name `{name}`")));
            }
            store.entries.push(Tensor {
                name,
                dims,
                dtype,
                payload,
            });
        }
        if cur.pos != bytes.len() {
            return Err(cur.error_at(
                cur.pos,
                format!("{} trailing bytes after last tensor", bytes.len() - cur.pos),
            ));
        }
        Ok(store)
    }

    /// Writes atomically: a temp file in the target directory is renamed into place.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| SppError::io(dir, e))?;
        tmp.write_all(&self.to_bytes())
            .and_then(|_| tmp.flush())
            .map_err(|e| SppError::io(path, e))?;
        tmp.persist(path).map_err(|e| SppError::io(path, e.error))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| SppError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error_at(&self, offset: usize, message: String) -> SppError {
        SppError::Format {
            offset: offset as u64,
            message,
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(self.error_at(
                self.pos,
                format!("truncated {what}: need {n} bytes, {remaining} left"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}
