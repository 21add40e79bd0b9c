//! Binary parameter checkpoints.
//!
//! Layout (little endian): magic `GMVA`, format version `u32`, parameter
//! count `u32`, then per parameter the path length `u32` and UTF-8 bytes, the
//! rank `u32` and each dimension `u32`, followed by the `f64` payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DiffError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"GMVA";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_params(mut w: impl Write, store: &ParamStore) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (path, p) in store.iter() {
        w.write_all(&(path.len() as u32).to_le_bytes())?;
        w.write_all(path.as_bytes())?;
        let shape = p.value.shape();
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in p.value.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads parameters into a fresh store seeded with `rng_seed`.
pub fn read_params(mut r: impl Read, rng_seed: u64) -> Result<ParamStore> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DiffError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(DiffError::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new(rng_seed);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let path = String::from_utf8(buf).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
        let rank = read_u32(&mut r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u32(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut b = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        store.insert(path, Tensor::new(shape, data)?);
    }
    Ok(store)
}

pub fn save(path: impl AsRef<Path>, store: &ParamStore) -> Result<()> {
    let mut buf = Vec::new();
    write_params(&mut buf, store)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, rng_seed: u64) -> Result<ParamStore> {
    let bytes = std::fs::read(path)?;
    read_params(bytes.as_slice(), rng_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut s = ParamStore::new(3);
        s.insert("ab", Tensor::matrix(1, 2, vec![1.5, -2.0]).unwrap());
        let mut buf = Vec::new();
        write_params(&mut buf, &s).unwrap();
        assert_eq!(&buf[..4], b"GMVA");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(&buf[16..18], b"ab");
        assert_eq!(buf.len(), 18 + 4 + 8 + 16);
    }

    #[test]
    fn wrong_version_rejected() {
        let mut buf = Vec::new();
        write_params(&mut buf, &ParamStore::new(0)).unwrap();
        buf[4] = 9;
        let err = read_params(buf.as_slice(), 0).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
    }
}
