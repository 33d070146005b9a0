//! Row-block access to feature matrices that may not fit in memory.

use std::fs::File;
use std::io::{BufReader, Seek, SeekFrom};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::pffm::{self, Header};

/// A `rows × dim` feature matrix read in row blocks.
pub trait FeatureSource {
    fn dim(&self) -> usize;

    fn rows(&self) -> usize;

    /// Fills `out` with rows `first..first + out.len() / dim`, row-major.
    fn fill(&mut self, first: usize, out: &mut [f64]) -> Result<()>;
}

fn check_range(src_rows: usize, dim: usize, first: usize, out: &[f64]) -> Result<usize> {
    if dim == 0 || !out.len().is_multiple_of(dim) {
        return Err(Error::shape(format!("buffer of {} values is not a multiple of dim {dim}", out.len())));
    }
    let n = out.len() / dim;
    if first + n > src_rows {
        return Err(Error::shape(format!("rows {first}..{} out of range ({src_rows} rows)", first + n)));
    }
    Ok(n)
}

/// Borrowed in-memory row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct SliceSource<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> SliceSource<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::shape(format!("{} values do not form rows of dim {dim}", data.len())));
        }
        Ok(Self { data, dim })
    }
}

impl FeatureSource for SliceSource<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    fn fill(&mut self, first: usize, out: &mut [f64]) -> Result<()> {
        check_range(self.rows(), self.dim, first, out)?;
        out.copy_from_slice(&self.data[first * self.dim..first * self.dim + out.len()]);
        Ok(())
    }
}

/// Rows produced on demand by `f(row, out)`; nothing is stored.
pub struct GeneratedSource<F> {
    rows: usize,
    dim: usize,
    f: F,
}

impl<F: FnMut(usize, &mut [f64])> GeneratedSource<F> {
    pub fn new(rows: usize, dim: usize, f: F) -> Self {
        Self { rows, dim, f }
    }
}

impl<F: FnMut(usize, &mut [f64])> FeatureSource for GeneratedSource<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rows(&self) -> usize {
        self.rows
    }

    fn fill(&mut self, first: usize, out: &mut [f64]) -> Result<()> {
        check_range(self.rows, self.dim, first, out)?;
        for (r, row) in out.chunks_exact_mut(self.dim).enumerate() {
            (self.f)(first + r, row);
        }
        Ok(())
    }
}

/// Streams rows from a `PFFM` file.
pub struct PffmSource {
    reader: BufReader<File>,
    header: Header,
}

impl PffmSource {
    pub fn open(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let header = pffm::read_header(&mut reader)?;
        let expected = pffm::HEADER_BYTES + (header.rows * header.dim * header.precision.bytes()) as u64;
        let actual = reader.get_ref().metadata()?.len();
        if actual != expected {
            return Err(Error::Format(format!(
                "{}: expected {expected} bytes for {}×{}, found {actual}",
                path.display(),
                header.rows,
                header.dim
            )));
        }
        Ok(Self { reader, header })
    }
}

impl FeatureSource for PffmSource {
    fn dim(&self) -> usize {
        self.header.dim
    }

    fn rows(&self) -> usize {
        self.header.rows
    }

    fn fill(&mut self, first: usize, out: &mut [f64]) -> Result<()> {
        check_range(self.header.rows, self.header.dim, first, out)?;
        let offset = pffm::HEADER_BYTES + (first * self.header.dim * self.header.precision.bytes()) as u64;
        self.reader.seek(SeekFrom::Start(offset))?;
        pffm::read_values(&mut self.reader, out, self.header.precision)
    }
}
