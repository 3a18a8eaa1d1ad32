//! Model file: `AFNN` magic, `u32` version, `u32` layer-width count, the
//! widths as `u32`, then per layer the row-major weights followed by the
//! biases as `f64`. Everything little-endian.

use std::io::{Read, Write};

use super::Mlp;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"AFNN";
pub const MODEL_VERSION: u32 = 1;

pub fn write_model(net: &Mlp, mut out: impl Write) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + net.num_params() * 8);
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.dims().len() as u32).to_le_bytes());
    for &d in net.dims() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for p in net.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Corrupt("model file truncated".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn take_u32(buf: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(take(buf, 4)?.try_into().unwrap()))
}

pub fn read_model(mut input: impl Read) -> Result<Mlp> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut buf = bytes.as_slice();
    if take(&mut buf, 4)? != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = take_u32(&mut buf)?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let n_dims = take_u32(&mut buf)? as usize;
    if n_dims > 64 {
        return Err(Error::Corrupt(format!("implausible layer count {n_dims}")));
    }
    let dims = (0..n_dims)
        .map(|_| take_u32(&mut buf).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut read_f64s = |len: usize| -> Result<Vec<f64>> {
        let raw = take(&mut buf, len.checked_mul(8).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in dims.windows(2) {
        weights.push(read_f64s(pair[0] * pair[1])?);
        biases.push(read_f64s(pair[1])?);
    }
    if !buf.is_empty() {
        return Err(Error::Corrupt(format!("{} trailing bytes", buf.len())));
    }
    Mlp::from_parts(dims, weights, biases)
}
