//! `PFFM` feature-matrix files.
//!
//! Layout (little-endian): magic `PFFM`, version `u32`, rows `u64`, dim `u64`,
//! bytes-per-value `u32` (4 or 8), then `rows × dim` values row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PFFM";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: u64 = 4 + 4 + 8 + 8 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn from_flag(flag: u32) -> Result<Self> {
        match flag {
            4 => Ok(Self::F32),
            8 => Ok(Self::F64),
            f => Err(Error::Format(format!("PFFM precision flag must be 4 or 8, got {f}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub rows: usize,
    pub dim: usize,
    pub precision: Precision,
}

pub fn write_header<W: Write>(w: &mut W, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(h.rows as u64).to_le_bytes())?;
    w.write_all(&(h.dim as u64).to_le_bytes())?;
    w.write_all(&(h.precision.bytes() as u32).to_le_bytes())?;
    Ok(())
}

pub fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("missing PFFM magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PFFM version {version}")));
    }
    r.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let dim = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b4)?;
    let precision = Precision::from_flag(u32::from_le_bytes(b4))?;
    Ok(Header { rows, dim, precision })
}

pub(crate) fn write_values<W: Write>(w: &mut W, values: &[f64], precision: Precision) -> Result<()> {
    for &v in values {
        match precision {
            Precision::F32 => w.write_all(&(v as f32).to_le_bytes())?,
            Precision::F64 => w.write_all(&v.to_le_bytes())?,
        }
    }
    Ok(())
}

/// Reads `out.len()` values.
pub(crate) fn read_values<R: Read>(r: &mut R, out: &mut [f64], precision: Precision) -> Result<()> {
    match precision {
        Precision::F32 => {
            let mut b = [0u8; 4];
            for v in out.iter_mut() {
                r.read_exact(&mut b)?;
                *v = f64::from(f32::from_le_bytes(b));
            }
        }
        Precision::F64 => {
            let mut b = [0u8; 8];
            for v in out.iter_mut() {
                r.read_exact(&mut b)?;
                *v = f64::from_le_bytes(b);
            }
        }
    }
    Ok(())
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::shape(format!("{} values for a {rows}×{dim} matrix", data.len())));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn write<W: Write>(&self, mut w: W, precision: Precision) -> Result<()> {
        write_header(&mut w, &Header { rows: self.rows, dim: self.dim, precision })?;
        write_values(&mut w, &self.data, precision)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let h = read_header(&mut r)?;
        let mut data = vec![0.0; h.rows * h.dim];
        read_values(&mut r, &mut data, h.precision)
            .map_err(|e| Error::Format(format!("truncated PFFM body: {e}")))?;
        Self::new(h.rows, h.dim, data)
    }

    pub fn save(&self, path: &Path, precision: Precision) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w, precision)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
