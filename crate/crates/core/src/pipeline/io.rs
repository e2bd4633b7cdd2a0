//! Binary tensor files.
//!
//! ```text
//! "GOTD"  u32 version (= 1)  u64 d  d × u64 dims  ∏dims × f64 values
//! ```
//!
//! All integers and floats are little-endian; values use the mode-0-fastest
//! layout of [`DenseTensor`].

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"GOTD";
pub const VERSION: u32 = 1;

pub fn encode_tensor(x: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * x.order() + 8 * x.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(x.order() as u64).to_le_bytes());
    for &d in x.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!("{what}: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    c.take(4, "magic")?;
    let version = u32::from_le_bytes(c.take(4, "version")?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported tensor format version {version}")));
    }
    let d = c.u64("order")?;
    if d == 0 {
        return Err(Error::Format("tensor has no dimensions".into()));
    }
    let d = usize::try_from(d).map_err(|_| Error::Format(format!("order {d} too large")))?;
    if d > (bytes.len() - c.pos) / 8 {
        return Err(Error::Truncated(format!("{d} dims announced, file too short")));
    }
    let mut dims = Vec::with_capacity(d);
    let mut count: usize = 1;
    for k in 0..d {
        let n = c.u64("dims")?;
        let n = usize::try_from(n).map_err(|_| Error::Format(format!("dim {k} = {n} too large")))?;
        if n == 0 {
            return Err(Error::Format(format!("dim {k} is zero")));
        }
        count = count
            .checked_mul(n)
            .filter(|c| c.checked_mul(8).is_some())
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        dims.push(n);
    }
    let start = c.pos;
    c.take(count * 8, "values")?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let raw = &bytes[start..c.pos];
    let data = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::from_vec(&dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_tensor(x))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes)
}
