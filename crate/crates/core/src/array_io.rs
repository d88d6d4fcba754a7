//! Self-describing flat array files used for ACCDOA tensors and features.
//!
//! All integers and reals are little-endian:
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 8            | magic `SELDARR\0`                         |
//! | 4 (`u32`)    | format version, currently 1               |
//! | 4 (`u32`)    | element type: 0 = `f32`, 1 = `f64`        |
//! | 4 (`u32`)    | number of axes `d`                        |
//! | 8·d (`u64`)  | axis lengths, outermost first             |
//! | 8 (`f64`)    | frame rate of the last axis in Hz         |
//! | rest         | elements in row-major order               |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{Dtype, Scalar};

pub const MAGIC: &[u8; 8] = b"SELDARR\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FlatArray<T> {
    pub shape: Vec<usize>,
    pub frame_rate_hz: f64,
    pub data: Vec<T>,
}

impl<T: Scalar> FlatArray<T> {
    pub fn new(shape: Vec<usize>, frame_rate_hz: f64, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            frame_rate_hz,
            data,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let width = T::DTYPE.width();
        let mut out = Vec::with_capacity(28 + 8 * self.shape.len() + width * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&T::DTYPE.code().to_le_bytes());
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &dim in &self.shape {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.frame_rate_hz.to_le_bytes());
        for &value in &self.data {
            value.write_le(&mut out);
        }
        out
    }

    /// Decodes either element type, converting to `T`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(8)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = cursor.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let code = cursor.u32()?;
        let dtype =
            Dtype::from_code(code).ok_or_else(|| Error::Format(format!("unknown dtype {code}")))?;
        let ndim = cursor.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        let mut count = 1usize;
        for _ in 0..ndim {
            let dim = usize::try_from(cursor.u64()?)
                .map_err(|_| Error::Format("axis length overflows".into()))?;
            count = count
                .checked_mul(dim)
                .ok_or_else(|| Error::Format("element count overflows".into()))?;
            shape.push(dim);
        }
        let frame_rate_hz = f64::from_le_bytes(cursor.take(8)?.try_into().expect("8 bytes"));
        let payload = cursor.take(count * dtype.width())?;
        if cursor.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                bytes.len() - cursor.pos
            )));
        }
        let data = match dtype {
            Dtype::F32 => payload
                .chunks_exact(4)
                .map(|c| T::lit(f64::from(f32::read_le(c))))
                .collect(),
            Dtype::F64 => payload
                .chunks_exact(8)
                .map(|c| T::lit(f64::read_le(c)))
                .collect(),
        };
        Self::new(shape, frame_rate_hz, data)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let array = FlatArray::new(vec![2, 1], 10.0, vec![1.0f32, -2.5]).unwrap();
        let bytes = array.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &0u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..28], &2u64.to_le_bytes());
        assert_eq!(&bytes[28..36], &1u64.to_le_bytes());
        assert_eq!(&bytes[36..44], &10f64.to_le_bytes());
        assert_eq!(&bytes[44..48], &1f32.to_le_bytes());
        assert_eq!(bytes.len(), 52);
    }

    #[test]
    fn rejects_damaged_input() {
        let bytes = FlatArray::new(vec![3], 1.0, vec![1.0f64, 2.0, 3.0])
            .unwrap()
            .to_bytes();
        assert!(FlatArray::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(FlatArray::<f64>::from_bytes(&extra).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(FlatArray::<f64>::from_bytes(&bad_magic).is_err());
        assert!(FlatArray::new(vec![2, 2], 1.0, vec![0.0f64; 3]).is_err());
    }

    #[test]
    fn converts_between_precisions() {
        let bytes = FlatArray::new(vec![2], 100.0, vec![0.5f32, 0.25])
            .unwrap()
            .to_bytes();
        let wide = FlatArray::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(wide.data, vec![0.5, 0.25]);
        assert_eq!(wide.frame_rate_hz, 100.0);
    }

    proptest! {
        #[test]
        fn round_trip(data in proptest::collection::vec(-1e6..1e6f64, 0..64), rate in 0.1..1e3f64) {
            let array = FlatArray::new(vec![data.len()], rate, data).unwrap();
            prop_assert_eq!(FlatArray::<f64>::from_bytes(&array.to_bytes()).unwrap(), array);
        }
    }
}
