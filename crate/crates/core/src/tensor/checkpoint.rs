//! Named-tensor checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes  "LWCK"
//! version    u32      1
//! count      u32      number of tensors
//! count × {  name_len u32, name (UTF-8), ndim u32, dims ndim × u64 }
//! count × {  data: product(dims) × f64 LE, in header order }
//! ```

use std::path::Path;

use super::array::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LWCK";
const VERSION: u32 = 1;

pub fn encode(entries: &[(&str, &Tensor)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for (_, t) in entries {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad checkpoint magic"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32("count")? as usize;
    let mut header = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32("name length")? as usize;
        let at = r.pos;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| Error::format(at as u64, "name is not UTF-8"))?
            .to_string();
        let ndim = r.u32("ndim")? as usize;
        let dims = (0..ndim)
            .map(|_| r.u64("dim").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        header.push((name, dims));
    }
    header
        .into_iter()
        .map(|(name, dims)| {
            let n: usize = dims.iter().product();
            let raw = r.take(n * 8, &format!("data of '{name}'"))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok((name, Tensor::new(dims, data)?))
        })
        .collect()
}

pub fn save(path: &Path, entries: &[(&str, &Tensor)]) -> Result<()> {
    std::fs::write(path, encode(entries)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Finds a tensor by name in a decoded checkpoint.
pub fn find<'a>(entries: &'a [(String, Tensor)], name: &str) -> Result<&'a Tensor> {
    entries
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::Lookup(format!("checkpoint has no tensor named '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(rows in 0usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let data: Vec<f64> = (0..rows * cols)
                .map(|i| ((seed ^ i as u64) as f64).sin() * 1e3)
                .collect();
            let t = Tensor::matrix(rows, cols, data).unwrap();
            let s = Tensor::scalar(f64::from_bits(seed | 1).abs().min(1e300));
            let bytes = encode(&[("w", &t), ("s", &s)]);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(&back[0].0, "w");
            prop_assert_eq!(&back[0].1, &t);
            prop_assert_eq!(back[1].1.data()[0].to_bits(), s.data()[0].to_bits());
        }
    }

    #[test]
    fn truncation_and_magic_are_rejected() {
        let t = Tensor::vector(vec![1.0, 2.0]);
        let bytes = encode(&[("w", &t)]);
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 0, .. })));
    }
}
