//! Binary model container.
//!
//! All integers are little-endian `u32`, all floats little-endian IEEE-754
//! `f64`.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "NPADMODL"
//! 8       4     format version (1)
//! 12      4     |V_src|
//! 16      4     |V_tgt|
//! 20      4     d_emb
//! 24      4     d_hid
//! 28      4     tensor count N
//! then N records:
//!         4     name length L
//!         L     name, UTF-8
//!         4     rows
//!         4     cols
//!         8·rows·cols  row-major values
//! ```
//!
//! Every tensor of [`ModelParams`] must appear exactly once; order is free
//! on read and follows [`TENSOR_NAMES`] on write.

use std::collections::HashMap;
use std::path::Path;

use super::params::{Dims, ModelParams, TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::numeric::Mat;

pub const MAGIC: &[u8; 8] = b"NPADMODL";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn model_to_bytes(params: &ModelParams) -> Vec<u8> {
    let d = params.dims;
    let mut buf = Vec::with_capacity(32 + 8 * params.num_parameters());
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION as usize);
    for v in [d.src_vocab, d.tgt_vocab, d.d_emb, d.d_hid] {
        put_u32(&mut buf, v);
    }
    let tensors = params.tensors();
    put_u32(&mut buf, tensors.len());
    for (name, t) in tensors {
        put_u32(&mut buf, name.len());
        buf.extend_from_slice(name.as_bytes());
        put_u32(&mut buf, t.rows());
        put_u32(&mut buf, t.cols());
        for x in t.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                "model file",
                format!("truncated at byte {}", self.pos),
            )),
        }
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::format("model file", "bad magic"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(Error::format(
            "model file",
            format!("unsupported format version {version}"),
        ));
    }
    let dims = Dims {
        src_vocab: r.u32()?,
        tgt_vocab: r.u32()?,
        d_emb: r.u32()?,
        d_hid: r.u32()?,
    };
    dims.validate()?;
    let count = r.u32()?;
    let mut found: HashMap<String, Mat> = HashMap::new();
    for _ in 0..count {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::format("model file", "tensor name is not UTF-8"))?
            .to_string();
        let rows = r.u32()?;
        let cols = r.u32()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format("model file", "tensor size overflow"))?;
        let raw = r.take(n.saturating_mul(8))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mat = Mat::from_vec(rows, cols, data)
            .map_err(|e| Error::format("model file", format!("tensor {name}: {e}")))?;
        if found.insert(name.clone(), mat).is_some() {
            return Err(Error::format(
                "model file",
                format!("duplicate tensor {name}"),
            ));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::format("model file", "trailing bytes"));
    }

    let mut params = ModelParams::zeros(dims)?;
    for (name, slot) in params.tensors_mut() {
        let mat = found
            .remove(name)
            .ok_or_else(|| Error::format("model file", format!("missing tensor {name}")))?;
        if mat.shape() != slot.shape() {
            return Err(Error::format(
                "model file",
                format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    mat.shape(),
                    slot.shape()
                ),
            ));
        }
        *slot = mat;
    }
    if let Some(extra) = found.keys().next() {
        return Err(Error::format(
            "model file",
            format!("unknown tensor {extra}"),
        ));
    }
    debug_assert_eq!(params.tensors().len(), TENSOR_NAMES.len());
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &model_to_bytes(params))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
