//! Feature cache: `AFVA` magic, `u32` version, `u32` block count, per block a
//! `u32` name length, UTF-8 name and `u64` width, then a `u64` row count and
//! the row-major values as `f32`. Everything little-endian.
//!
//! Values are narrowed to `f32` on write; matrices whose entries are already
//! `f32`-representable round-trip bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use super::matrix::FeatureMatrix;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"AFVA";
pub const CACHE_VERSION: u32 = 1;

pub fn cache_write(matrix: &FeatureMatrix, mut out: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(64 + matrix.data().len() * 4);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(matrix.schema().len() as u32).to_le_bytes());
    for (name, width) in matrix.schema() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(*width as u64).to_le_bytes());
    }
    buf.extend_from_slice(&(matrix.n_rows() as u64).to_le_bytes());
    for v in matrix.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Corrupt(format!("cache truncated while reading {what}")));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn cache_read(mut input: impl Read) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor(&bytes);
    if cur.0.len() < 4 || &cur.0[..4] != CACHE_MAGIC {
        return Err(Error::Format("not a feature cache (bad magic)".into()));
    }
    cur.take(4, "magic")?;
    let version = cur.u32("version")?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    let n_blocks = cur.u32("block count")?;
    let mut schema = Vec::new();
    for _ in 0..n_blocks {
        let len = cur.u32("block name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "block name")?)
            .map_err(|e| Error::Corrupt(format!("block name: {e}")))?
            .to_string();
        let width = cur.u64("block width")? as usize;
        schema.push((name, width));
    }
    let n_rows = cur.u64("row count")? as usize;
    let dim: usize = schema.iter().map(|(_, w)| w).sum();
    let expected = n_rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Corrupt("row count overflows".into()))?;
    if cur.0.len() != expected {
        return Err(Error::Corrupt(format!(
            "header announces {n_rows} rows ({expected} bytes) but payload has {} bytes",
            cur.0.len()
        )));
    }
    let data = cur
        .0
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    if dim == 0 {
        return Ok(FeatureMatrix::empty(schema));
    }
    FeatureMatrix::from_rows(schema, data)
}

pub fn write_cache_file(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    cache_write(matrix, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_cache_file(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    cache_read(std::fs::File::open(path)?)
}
