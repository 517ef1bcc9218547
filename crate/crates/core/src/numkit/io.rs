//! Tensor file format.
//!
//! Layout: magic `CALT`, version u32 = 1, dtype u8 (1 = f64), rank u8,
//! dims as u32, then the row-major payload. All integers and floats are
//! little-endian.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"CALT";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

impl Tensor {
    pub fn write_calt<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[DTYPE_F64, self.shape().len() as u8])?;
        for &d in self.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in self.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_calt<R: Read>(r: &mut R) -> Result<Tensor> {
        let mut offset = 0u64;
        let mut magic = [0u8; 4];
        read_exact_at(r, &mut magic, &mut offset)?;
        if &magic != MAGIC {
            return Err(Error::format(0, "bad magic, expected CALT"));
        }
        let mut v4 = [0u8; 4];
        read_exact_at(r, &mut v4, &mut offset)?;
        let version = u32::from_le_bytes(v4);
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let mut hdr = [0u8; 2];
        read_exact_at(r, &mut hdr, &mut offset)?;
        if hdr[0] != DTYPE_F64 {
            return Err(Error::format(8, format!("unsupported dtype {}", hdr[0])));
        }
        let rank = hdr[1] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut d4 = [0u8; 4];
            read_exact_at(r, &mut d4, &mut offset)?;
            let d = u32::from_le_bytes(d4) as usize;
            if d == 0 {
                return Err(Error::format(offset - 4, "zero dimension"));
            }
            shape.push(d);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            let mut f8 = [0u8; 8];
            read_exact_at(r, &mut f8, &mut offset)?;
            data.push(f64::from_le_bytes(f8));
        }
        Tensor::new(shape, data).map_err(|e| Error::format(offset, e.to_string()))
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::format(*offset, "unexpected end of file"))?;
    *offset += buf.len() as u64;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Tensor::new(vec![2, 3], vec![1.5, -0.25, 3.125, 0.0, 1e-300, 7.0]).unwrap();
        let mut buf = Vec::new();
        t.write_calt(&mut buf).unwrap();
        let back = Tensor::read_calt(&mut buf.as_slice()).unwrap();
        assert_eq!(t.shape(), back.shape());
        assert_eq!(t.data(), back.data());
    }

    #[test]
    fn truncated_file_reports_offset() {
        let t = Tensor::new(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        t.write_calt(&mut buf).unwrap();
        buf.truncate(buf.len() - 5);
        match Tensor::read_calt(&mut buf.as_slice()) {
            Err(Error::Format { offset, .. }) => assert!(offset > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE\x01\x00\x00\x00\x01\x01\x01\x00\x00\x00";
        assert!(matches!(
            Tensor::read_calt(&mut &buf[..]),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
