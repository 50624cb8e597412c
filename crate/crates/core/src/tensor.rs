//! Dense row-major tensor container and the TEN1 file format.
//!
//! TEN1 layout (little-endian): magic `TEN1`, version `u16 = 1`, ndim `u8`,
//! each dim as `u32`, then the payload as `f32` row-major. Values are held
//! as `f64` in memory; the file narrows to `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

const TEN1_MAGIC: &[u8; 4] = b"TEN1";
const TEN1_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("dims {dims:?} do not match data length {len}")]
    ShapeMismatch { dims: Vec<usize>, len: usize },
    #[error("tensor contains non-finite values")]
    NonFinite,
}

/// Dense multi-dimensional array of finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self { dims: dims.to_vec(), data: vec![0.0; len] }
    }

    /// Build from a flat buffer, checking shape and finiteness.
    pub fn from_vec(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let expect: usize = dims.iter().product();
        if data.len() != expect {
            return Err(TensorError::ShapeMismatch { dims, len: data.len() });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (i, (&ix, &d)) in idx.iter().zip(&self.dims).enumerate() {
            debug_assert!(ix < d, "index {ix} out of bounds for dim {i} (extent {d})");
            off = off * d + ix;
        }
        off
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub fn add(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] += v;
    }

    /// Serialize as TEN1, returning the byte count.
    pub fn write_ten1(&self, path: &Path) -> Result<u64, TensorError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(TEN1_MAGIC)?;
        w.write_u16::<LittleEndian>(TEN1_VERSION)?;
        w.write_u8(self.dims.len() as u8)?;
        for &d in &self.dims {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in &self.data {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
        w.flush()?;
        Ok(4 + 2 + 1 + 4 * self.dims.len() as u64 + 4 * self.data.len() as u64)
    }

    pub fn read_ten1(path: &Path) -> Result<Self, TensorError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| TensorError::Format("truncated TEN1 header".into()))?;
        if &magic != TEN1_MAGIC {
            return Err(TensorError::Format("bad TEN1 magic".into()));
        }
        let version = r.read_u16::<LittleEndian>()?;
        if version != TEN1_VERSION {
            return Err(TensorError::Format(format!("unsupported TEN1 version {version}")));
        }
        let ndim = r.read_u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.read_u32::<LittleEndian>()? as usize);
        }
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        for i in 0..len {
            let v = r
                .read_f32::<LittleEndian>()
                .map_err(|_| TensorError::Format(format!("truncated TEN1 payload at {i}")))?;
            data.push(v as f64);
        }
        Tensor::from_vec(dims, data)
    }

    /// Debug export of a 2-D tensor as CSV rows.
    pub fn write_csv_2d(&self, path: &Path) -> Result<(), TensorError> {
        if self.dims.len() != 2 {
            return Err(TensorError::Format(format!(
                "CSV export needs a 2-D tensor, got {} dims",
                self.dims.len()
            )));
        }
        let mut w = BufWriter::new(File::create(path)?);
        let (rows, cols) = (self.dims[0], self.dims[1]);
        for r in 0..rows {
            let row: Vec<String> =
                (0..cols).map(|c| format!("{}", self.data[r * cols + c])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_is_row_major() {
        let t = Tensor::zeros(&[2, 3, 4]);
        assert_eq!(t.offset(&[0, 0, 0]), 0);
        assert_eq!(t.offset(&[0, 0, 3]), 3);
        assert_eq!(t.offset(&[0, 1, 0]), 4);
        assert_eq!(t.offset(&[1, 0, 0]), 12);
        assert_eq!(t.offset(&[1, 2, 3]), 23);
    }

    #[test]
    fn from_vec_checks_shape_and_finiteness() {
        assert!(Tensor::from_vec(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, f64::NAN, 4.0]).is_err());
        assert!(Tensor::from_vec(vec![2, 2], vec![1.0; 4]).is_ok());
    }

    #[test]
    fn ten1_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ten1");
        let t = Tensor::from_vec(vec![2, 3], vec![0.5, -1.0, 2.25, 0.0, 8.0, -0.125]).unwrap();
        let n = t.write_ten1(&path).unwrap();
        assert_eq!(n, 4 + 2 + 1 + 4 * 2 + 4 * 6);
        let back = Tensor::read_ten1(&path).unwrap();
        assert_eq!(back.dims(), &[2, 3]);
        // Values above are exactly representable in f32.
        assert_eq!(back.data(), t.data());
    }

    #[test]
    fn ten1_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ten1");
        std::fs::write(&path, b"XXXX\x01\x00\x00").unwrap();
        assert!(matches!(Tensor::read_ten1(&path), Err(TensorError::Format(_))));
    }

    #[test]
    fn csv_2d_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let t = Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        t.write_csv_2d(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "1,2\n3,4\n");
        let t3 = Tensor::zeros(&[1, 1, 1]);
        assert!(t3.write_csv_2d(&path).is_err());
    }
}
