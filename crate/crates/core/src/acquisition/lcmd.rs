//! Largest-cluster maximum-distance batch selection.
//!
//! Every unselected candidate belongs to its nearest centre. Each step picks
//! the cluster with the largest total squared distance and adds its farthest
//! member to the batch, where it becomes a centre itself. Ties go to the lowest
//! centre index, then the lowest candidate index.

use log::warn;

use super::linalg::squared_distance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcmdPick {
    /// Row of the chosen candidate in the candidate matrix.
    pub position: usize,
    /// Centre whose cluster was chosen.
    pub cluster: usize,
    pub cluster_mass: f64,
    /// Squared distance of the candidate to that centre.
    pub distance: f64,
}

/// Nearest-centre bookkeeping over a fixed candidate set. Centres are added
/// in order and numbered from zero; selected candidates join as new centres.
#[derive(Debug, Clone)]
pub struct LcmdState<'a> {
    candidates: &'a [f64],
    dim: usize,
    nearest: Vec<usize>,
    dist: Vec<f64>,
    selected: Vec<bool>,
    n_centres: usize,
}

impl<'a> LcmdState<'a> {
    pub fn new(candidates: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !candidates.len().is_multiple_of(dim) {
            return Err(Error::shape(format!("{} values do not form rows of dim {dim}", candidates.len())));
        }
        let n = candidates.len() / dim;
        Ok(Self {
            candidates,
            dim,
            nearest: vec![usize::MAX; n],
            dist: vec![f64::INFINITY; n],
            selected: vec![false; n],
            n_centres: 0,
        })
    }

    /// Bytes of per-candidate bookkeeping for `n` candidates.
    pub fn bytes_for(n: usize) -> usize {
        n * (std::mem::size_of::<usize>() + std::mem::size_of::<f64>() + 1)
    }

    pub fn n_candidates(&self) -> usize {
        self.dist.len()
    }

    pub fn n_centres(&self) -> usize {
        self.n_centres
    }

    fn candidate(&self, j: usize) -> &'a [f64] {
        &self.candidates[j * self.dim..(j + 1) * self.dim]
    }

    fn absorb(&mut self, centre: &[f64]) {
        let id = self.n_centres;
        for j in 0..self.dist.len() {
            let d = squared_distance(self.candidate(j), centre);
            if d < self.dist[j] {
                self.dist[j] = d;
                self.nearest[j] = id;
            }
        }
        self.n_centres += 1;
    }

    /// Adds the rows of `chunk` as the next centres.
    pub fn add_centres(&mut self, chunk: &[f64]) -> Result<()> {
        if !chunk.len().is_multiple_of(self.dim) {
            return Err(Error::DimMismatch { expected: self.dim, got: chunk.len() % self.dim });
        }
        for c in chunk.chunks_exact(self.dim) {
            self.absorb(c);
        }
        Ok(())
    }

    /// Selects up to `batch` candidates. Asking for more than remain selects
    /// all of them.
    pub fn select(&mut self, batch: usize) -> Result<Vec<LcmdPick>> {
        if batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.n_centres == 0 {
            return Err(Error::Empty("centre set"));
        }
        let remaining = self.selected.iter().filter(|s| !**s).count();
        if batch > remaining {
            warn!("batch of {batch} exceeds {remaining} remaining candidates; selecting all");
        }
        let mut picks = Vec::with_capacity(batch.min(remaining));
        let mut mass = Vec::new();
        let mut occupied = Vec::new();
        for _ in 0..batch.min(remaining) {
            mass.clear();
            mass.resize(self.n_centres, 0.0);
            occupied.clear();
            occupied.resize(self.n_centres, false);
            for j in 0..self.dist.len() {
                if !self.selected[j] {
                    mass[self.nearest[j]] += self.dist[j];
                    occupied[self.nearest[j]] = true;
                }
            }
            let mut cluster = usize::MAX;
            for c in 0..self.n_centres {
                if occupied[c] && (cluster == usize::MAX || mass[c] > mass[cluster]) {
                    cluster = c;
                }
            }
            let mut best = usize::MAX;
            for j in 0..self.dist.len() {
                if !self.selected[j]
                    && self.nearest[j] == cluster
                    && (best == usize::MAX || self.dist[j] > self.dist[best])
                {
                    best = j;
                }
            }
            picks.push(LcmdPick {
                position: best,
                cluster,
                cluster_mass: mass[cluster],
                distance: self.dist[best],
            });
            self.selected[best] = true;
            self.absorb(self.candidate(best));
        }
        Ok(picks)
    }
}

/// One-shot LCMD over in-memory candidates and centres.
pub fn lcmd_select(candidates: &[f64], centres: &[f64], dim: usize, batch: usize) -> Result<Vec<LcmdPick>> {
    let mut state = LcmdState::new(candidates, dim)?;
    state.add_centres(centres)?;
    state.select(batch)
}
