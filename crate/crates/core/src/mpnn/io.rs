//! `model.bin` layout, all integers little-endian:
//!
//! ```text
//! magic "DCDM" | version u32 | variant u8
//! input_dim u64 | hidden_dim u64 | num_layers u64 | class_count u64
//! per tensor, in `Model::tensors` order: rows u64 | cols u64 | rows*cols f64 (row-major)
//! ```

use std::io::Read;
use std::path::Path;

use super::model::Model;
use super::{MpnnError, Result, Variant};
use crate::fsutil::write_atomic;

pub const MODEL_MAGIC: [u8; 4] = *b"DCDM";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(model.variant.code());
    for d in [model.input_dim(), model.hidden_dim(), model.layers.len(), model.class_count()] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for (_, t) in model.tensors() {
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        self.0.read_exact(&mut buf).map_err(|_| MpnnError::Format("truncated".into()))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let bad = |m: String| MpnnError::Format(m);
    let mut cur = Cursor(bytes);
    if cur.take(4)? != MODEL_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let code = cur.take(1)?[0];
    let variant = Variant::from_code(code).ok_or_else(|| bad(format!("unknown variant code {code}")))?;
    let dims = [cur.u64()?, cur.u64()?, cur.u64()?, cur.u64()?];
    let [input_dim, hidden_dim, num_layers, class_count] = dims;
    if hidden_dim == 0 || class_count == 0 || num_layers > 64 || input_dim > 1 << 24 || hidden_dim > 1 << 16 {
        return Err(bad(format!("implausible dimensions {dims:?}")));
    }
    let mut model = Model::new(variant, input_dim, hidden_dim, num_layers, class_count, 0);
    for t in model.tensors_mut() {
        let shape = (cur.u64()?, cur.u64()?);
        if shape != t.dim() {
            return Err(bad(format!("tensor shape {shape:?} does not match expected {:?}", t.dim())));
        }
        for v in t.iter_mut() {
            *v = cur.f64()?;
        }
    }
    if !cur.0.is_empty() {
        return Err(bad("trailing bytes".into()));
    }
    Ok(model)
}

pub fn write_model(model: &Model, path: &Path) -> Result<()> {
    write_atomic(path, &encode_model(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<Model> {
    decode_model(&std::fs::read(path)?)
}
