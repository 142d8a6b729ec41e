//! Binary checkpoint format.
//!
//! `CRECKPT1`, then per tensor: name length (u64), UTF-8 name, rank (u64),
//! dims (u64 each), values (f64 each). All integers and floats little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

use super::DenseTensor;

pub const MAGIC: &[u8; 8] = b"CRECKPT1";

pub fn encode<T: Scalar>(tensors: &[(String, DenseTensor<T>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    out
}

struct Cursor<'b> {
    bytes: &'b [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Vec<(String, DenseTensor<T>)>> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut c = Cursor { bytes, pos: 8 };
    let mut out = Vec::new();
    while c.pos < bytes.len() {
        let len = c.u64()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("tensor name: {e}")))?;
        let rank = c.u64()? as usize;
        let shape = (0..rank)
            .map(|_| c.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| {
            Error::Checkpoint(format!("tensor {name}: shape overflow"))
        })?;
        if n.saturating_mul(8) > bytes.len() - c.pos {
            return Err(Error::Checkpoint(format!("tensor {name}: truncated values")));
        }
        let data = (0..n).map(|_| c.f64().map(T::lit)).collect::<Result<Vec<_>>>()?;
        out.push((name, DenseTensor::from_vec(shape, data)?));
    }
    Ok(out)
}

pub fn write_checkpoint<T: Scalar>(path: impl AsRef<Path>, tensors: &[(String, DenseTensor<T>)]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(tensors))?;
    f.sync_all()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<(String, DenseTensor<T>)>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_exact() {
        let t = DenseTensor::matrix(1, 2, vec![1.5f64, -2.0]);
        let bytes = encode(&[("ab".to_string(), t)]);
        let mut want = b"CRECKPT1".to_vec();
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(b"ab");
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&1u64.to_le_bytes());
        want.extend_from_slice(&2u64.to_le_bytes());
        want.extend_from_slice(&1.5f64.to_le_bytes());
        want.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, want);
    }

    #[test]
    fn rejects_corruption() {
        assert!(decode::<f64>(b"NOTMAGIC").is_err());
        let t = DenseTensor::matrix(2, 2, vec![1.0f64; 4]);
        let bytes = encode(&[("w".to_string(), t)]);
        assert!(decode::<f64>(&bytes[..bytes.len() - 3]).is_err());
    }

    proptest! {
        #[test]
        fn round_trips(values in prop::collection::vec(-1e6f64..1e6, 0..40), split in 0usize..40) {
            let k = split.min(values.len());
            let a = DenseTensor::matrix(1, k, values[..k].to_vec());
            let b = DenseTensor::from_vec(vec![values.len() - k], values[k..].to_vec()).unwrap();
            let tensors = vec![("theta.0".to_string(), a), ("gru.W.c".to_string(), b)];
            prop_assert_eq!(decode::<f64>(&encode(&tensors)).unwrap(), tensors);
        }
    }
}
