//! Feature-space precision matrix `M = (ΦᵀΦ + λI)⁻¹` and the posterior
//! variance score `s(x) = φ(x)ᵀ M φ(x)`.
//!
//! For a kernel `k(x, x') = φ(x)ᵀφ(x')` the Gaussian posterior variance of a
//! candidate given the training rows `Φ` is exactly `λ·s(x)`, so scores rank
//! candidates identically without touching any `n × n` kernel.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::linalg::dot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionState {
    dim: usize,
    gram: Vec<f64>,
    rows_seen: usize,
    ridge: Option<f64>,
    inverse: Option<Vec<f64>>,
}

impl PrecisionState {
    pub fn new(dim: usize) -> Self {
        Self { dim, gram: vec![0.0; dim * dim], rows_seen: 0, ridge: None, inverse: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    pub fn is_valid(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn inverse(&self) -> Result<&[f64]> {
        self.inverse.as_deref().ok_or(Error::InvalidPrecision)
    }

    /// Bytes held by the Gram matrix and, once finalized, the inverse.
    pub fn footprint_bytes(&self) -> usize {
        8 * self.dim * self.dim * (1 + usize::from(self.inverse.is_some()))
    }

    fn check_chunk(&self, chunk: &[f64]) -> Result<usize> {
        if self.dim == 0 || !chunk.len().is_multiple_of(self.dim) {
            return Err(Error::DimMismatch { expected: self.dim, got: chunk.len() % self.dim.max(1) });
        }
        Ok(chunk.len() / self.dim)
    }

    /// `G ← G + ΦᵀΦ` for the rows of `chunk`, added one row at a time in order.
    pub fn accumulate(&mut self, chunk: &[f64]) -> Result<()> {
        let rows = self.check_chunk(chunk)?;
        let d = self.dim;
        for x in chunk.chunks_exact(d) {
            add_outer(&mut self.gram, x);
        }
        self.rows_seen += rows;
        self.invalidate();
        Ok(())
    }

    /// Like [`accumulate`](Self::accumulate) but splits the chunk across
    /// `workers` partial Gram matrices that are merged in worker order.
    pub fn accumulate_parallel(&mut self, chunk: &[f64], workers: usize) -> Result<()> {
        let rows = self.check_chunk(chunk)?;
        let d = self.dim;
        let per = rows.div_ceil(workers.max(1)).max(1);
        let partials: Vec<Vec<f64>> = chunk
            .par_chunks(per * d)
            .map(|block| {
                let mut g = vec![0.0; d * d];
                block.chunks_exact(d).for_each(|x| add_outer(&mut g, x));
                g
            })
            .collect();
        for p in partials {
            self.gram.iter_mut().zip(p).for_each(|(g, v)| *g += v);
        }
        self.rows_seen += rows;
        self.invalidate();
        Ok(())
    }

    /// Adds another partial Gram accumulation into this one.
    pub fn merge(&mut self, other: &PrecisionState) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: other.dim });
        }
        self.gram.iter_mut().zip(&other.gram).for_each(|(g, v)| *g += v);
        self.rows_seen += other.rows_seen;
        self.invalidate();
        Ok(())
    }

    fn invalidate(&mut self) {
        self.inverse = None;
        self.ridge = None;
    }

    /// Computes `M = (G + λI)⁻¹` through a Cholesky factorization.
    pub fn finalize(&mut self, ridge: f64) -> Result<()> {
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge must be positive, got {ridge}")));
        }
        if self.gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("Gram matrix has non-finite entries".into()));
        }
        let d = self.dim;
        let mut a = DMatrix::from_row_slice(d, d, &self.gram);
        for i in 0..d {
            a[(i, i)] += ridge;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Factorization(format!("G + {ridge}·I is not positive definite")))?;
        let inv = chol.inverse();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        self.inverse = Some(m);
        self.ridge = Some(ridge);
        Ok(())
    }

    /// `φᵀ M φ` for a single feature row.
    pub fn score(&self, phi: &[f64]) -> Result<f64> {
        let m = self.inverse()?;
        if phi.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: phi.len() });
        }
        Ok(quadratic_form(m, phi))
    }

    /// Scores every row of `chunk` into `out`.
    pub fn score_chunk(&self, chunk: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.inverse()?;
        let rows = self.check_chunk(chunk)?;
        if out.len() != rows {
            return Err(Error::shape(format!("{} score slots for {rows} rows", out.len())));
        }
        for (s, x) in out.iter_mut().zip(chunk.chunks_exact(self.dim)) {
            *s = quadratic_form(m, x);
        }
        Ok(())
    }

    /// Parallel [`score_chunk`](Self::score_chunk); each row is scored by the
    /// same arithmetic, so results match the sequential path bitwise.
    pub fn score_chunk_parallel(&self, chunk: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.inverse()?;
        let rows = self.check_chunk(chunk)?;
        if out.len() != rows {
            return Err(Error::shape(format!("{} score slots for {rows} rows", out.len())));
        }
        out.par_iter_mut()
            .zip(chunk.par_chunks_exact(self.dim))
            .for_each(|(s, x)| *s = quadratic_form(m, x));
        Ok(())
    }
}

fn add_outer(g: &mut [f64], x: &[f64]) {
    let d = x.len();
    for (a, &xa) in x.iter().enumerate() {
        let row = &mut g[a * d..(a + 1) * d];
        for (gb, &xb) in row.iter_mut().zip(x) {
            *gb += xa * xb;
        }
    }
}

fn quadratic_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for (a, &xa) in x.iter().enumerate() {
        s += xa * dot(&m[a * d..(a + 1) * d], x);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> Vec<f64> {
        (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn one_hot_rows_count_on_the_diagonal() {
        let mut st = PrecisionState::new(4);
        let e = |i: usize| {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            v
        };
        let chunk: Vec<f64> = [e(0), e(0), e(1)].concat();
        st.accumulate(&chunk).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| st.gram()[i * 4 + i]).collect();
        assert_eq!(diag, vec![2.0, 1.0, 0.0, 0.0]);
        assert_eq!(st.rows_seen(), 3);
    }

    #[test]
    fn chunking_does_not_change_the_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_rows(&mut rng, 40, 16);
        let mut whole = PrecisionState::new(16);
        whole.accumulate(&data).unwrap();
        let mut pieces = PrecisionState::new(16);
        for c in data.chunks(7 * 16) {
            pieces.accumulate(c).unwrap();
        }
        assert_eq!(whole.gram(), pieces.gram());
        // dense product oracle
        for a in 0..16 {
            for b in 0..16 {
                let want: f64 = (0..40).map(|r| data[r * 16 + a] * data[r * 16 + b]).sum();
                assert!((whole.gram()[a * 16 + b] - want).abs() < 1e-12);
                assert_eq!(whole.gram()[a * 16 + b], whole.gram()[b * 16 + a]);
            }
        }
    }

    #[test]
    fn parallel_accumulation_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_rows(&mut rng, 101, 9);
        let mut seq = PrecisionState::new(9);
        seq.accumulate(&data).unwrap();
        let mut par = PrecisionState::new(9);
        par.accumulate_parallel(&data, 4).unwrap();
        for (a, b) in seq.gram().iter().zip(par.gram()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        seq.finalize(1e-4).unwrap();
        par.finalize(1e-4).unwrap();
        let x = random_rows(&mut rng, 1, 9);
        let (s1, s2) = (seq.score(&x).unwrap(), par.score(&x).unwrap());
        assert!((s1 - s2).abs() <= 1e-8 * s1);
    }

    #[test]
    fn empty_gram_inverse_is_scaled_identity() {
        let mut st = PrecisionState::new(3);
        st.finalize(0.5).unwrap();
        let m = st.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i * 3 + j] - if i == j { 2.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        st.finalize(1.0).unwrap();
        let x = [0.3, -1.2, 2.0];
        let s = st.score(&x).unwrap();
        assert!((s - (0.09 + 1.44 + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn identity_features_give_shifted_inverse() {
        let mut st = PrecisionState::new(3);
        st.accumulate(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        st.finalize(0.25).unwrap();
        let m = st.inverse().unwrap();
        for i in 0..3 {
            assert!((m[i * 3 + i] - 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_residual_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 12;
        let data = random_rows(&mut rng, 30, d);
        let mut st = PrecisionState::new(d);
        st.accumulate(&data).unwrap();
        let lambda = 1e-3;
        st.finalize(lambda).unwrap();
        let m = st.inverse().unwrap();
        let g = st.gram();
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for k in 0..d {
                    let a = g[k * d + j] + if k == j { lambda } else { 0.0 };
                    v += m[i * d + k] * a;
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn single_training_point_closed_form() {
        let lambda = 0.1;
        let phi = [0.6, 0.0, 0.8];
        let mut st = PrecisionState::new(3);
        st.accumulate(&phi).unwrap();
        st.finalize(lambda).unwrap();
        let s = st.score(&phi).unwrap();
        assert!((lambda * s - lambda / (1.0 + lambda)).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let mut st = PrecisionState::new(3);
        assert!(matches!(st.score(&[1.0, 0.0, 0.0]), Err(Error::InvalidPrecision)));
        assert!(matches!(st.accumulate(&[1.0, 2.0]), Err(Error::DimMismatch { .. })));
        assert!(st.finalize(0.0).is_err());
        st.accumulate(&[f64::NAN, 0.0, 0.0]).unwrap();
        assert!(matches!(st.finalize(1.0), Err(Error::Factorization(_))));
    }

    #[test]
    fn accumulating_invalidates_inverse() {
        let mut st = PrecisionState::new(2);
        st.finalize(1.0).unwrap();
        assert!(st.is_valid());
        st.accumulate(&[1.0, 1.0]).unwrap();
        assert!(!st.is_valid());
    }
}
