//! The chunked acquisition pass: accumulate the training Gram, score the pool
//! chunk by chunk into a top-K shortlist, then select a batch from it.
//!
//! Working memory is `O(d² + C·d + K·d)`; neither the pool size nor the
//! training size appears in any buffer except the LCMD cluster-mass table,
//! which has one slot per centre.

use std::io::Write;
use std::time::Instant;

use super::lcmd::LcmdState;
use super::meter::ScratchMeter;
use super::precision::PrecisionState;
use super::select::{Pick, SelectionResult};
use super::shortlist::{Entry, Shortlist};
use super::source::FeatureSource;
use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub ridge: f64,
    pub shortlist: usize,
    pub chunk: usize,
    /// Allows reordered Gram reductions and multi-threaded scoring.
    pub parallel: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { ridge: DEFAULT_RIDGE, shortlist: 500, chunk: 512, parallel: false }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge must be positive, got {}", self.ridge)));
        }
        if self.shortlist == 0 || self.chunk == 0 {
            return Err(Error::invalid("shortlist size and chunk size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchRule {
    /// LCMD over the shortlist with the training rows as initial centres.
    Lcmd,
    /// The top-B of the shortlist.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcquisitionStats {
    pub train_rows: usize,
    pub pool_rows: usize,
    pub dim: usize,
    pub chunk: usize,
    pub shortlist: usize,
    pub scores_computed: usize,
    pub scratch_peak_bytes: usize,
    pub wall_seconds: f64,
}

impl AcquisitionStats {
    pub const CSV_HEADER: &'static str =
        "train_rows,pool_rows,dim,chunk,shortlist,scores_computed,scratch_peak_bytes,wall_seconds";

    pub fn write_csv_row<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.6}",
            self.train_rows,
            self.pool_rows,
            self.dim,
            self.chunk,
            self.shortlist,
            self.scores_computed,
            self.scratch_peak_bytes,
            self.wall_seconds
        )?;
        Ok(())
    }
}

/// Bytes held while finalizing: the Gram, the inverse, and the factorization
/// workspace.
fn precision_bytes(dim: usize) -> usize {
    4 * 8 * dim * dim
}

/// Accumulates the Gram of `train` in chunks and finalizes the precision.
pub fn build_precision(
    train: &mut dyn FeatureSource,
    cfg: &PipelineConfig,
    meter: &ScratchMeter,
) -> Result<PrecisionState> {
    cfg.validate()?;
    let d = train.dim();
    let mut state = PrecisionState::new(d);
    let mut buf = meter.buffer(cfg.chunk * d);
    let mut first = 0;
    while first < train.rows() {
        let n = cfg.chunk.min(train.rows() - first);
        let block = &mut buf[..n * d];
        train.fill(first, block)?;
        if cfg.parallel {
            state.accumulate_parallel(block, rayon::current_num_threads())?;
        } else {
            state.accumulate(block)?;
        }
        first += n;
    }
    drop(buf);
    let _held = meter.track(precision_bytes(d));
    state.finalize(cfg.ridge)?;
    Ok(state)
}

/// Scores every pool row and keeps the `K` best.
pub fn stream_shortlist(
    pool: &mut dyn FeatureSource,
    state: &PrecisionState,
    cfg: &PipelineConfig,
    meter: &ScratchMeter,
) -> Result<Vec<Entry>> {
    cfg.validate()?;
    if pool.rows() == 0 {
        return Err(Error::Empty("candidate pool"));
    }
    let d = state.dim();
    if pool.dim() != d {
        return Err(Error::DimMismatch { expected: d, got: pool.dim() });
    }
    let _heap = meter.track(cfg.shortlist * Shortlist::ENTRY_BYTES);
    let mut shortlist = Shortlist::new(cfg.shortlist)?;
    let mut buf = meter.buffer(cfg.chunk * d);
    let mut scores = meter.buffer(cfg.chunk);
    let mut first = 0;
    while first < pool.rows() {
        let n = cfg.chunk.min(pool.rows() - first);
        pool.fill(first, &mut buf[..n * d])?;
        if cfg.parallel {
            state.score_chunk_parallel(&buf[..n * d], &mut scores[..n])?;
        } else {
            state.score_chunk(&buf[..n * d], &mut scores[..n])?;
        }
        for (r, &s) in scores[..n].iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("score of candidate {}", first + r)));
            }
            shortlist.offer(first + r, s)?;
        }
        first += n;
    }
    Ok(shortlist.into_ranked())
}

/// LCMD over shortlisted pool rows, seeded with every training row as a
/// centre. Training rows are streamed in chunks.
pub fn lcmd_over_shortlist(
    entries: &[Entry],
    pool: &mut dyn FeatureSource,
    train: &mut dyn FeatureSource,
    batch: usize,
    chunk: usize,
    meter: &ScratchMeter,
) -> Result<SelectionResult> {
    let d = pool.dim();
    if train.dim() != d {
        return Err(Error::DimMismatch { expected: d, got: train.dim() });
    }
    let mut feats = meter.buffer(entries.len() * d);
    for (k, e) in entries.iter().enumerate() {
        pool.fill(e.index, &mut feats[k * d..(k + 1) * d])?;
    }
    let _state = meter.track(LcmdState::bytes_for(entries.len()));
    let _masses = meter.track((train.rows() + batch) * 9);
    let mut lcmd = LcmdState::new(&feats, d)?;
    {
        let mut buf = meter.buffer(chunk.max(1) * d);
        let mut first = 0;
        while first < train.rows() {
            let n = chunk.max(1).min(train.rows() - first);
            train.fill(first, &mut buf[..n * d])?;
            lcmd.add_centres(&buf[..n * d])?;
            first += n;
        }
    }
    let picks = lcmd
        .select(batch)?
        .into_iter()
        .map(|p| Pick {
            index: entries[p.position].index,
            score: entries[p.position].score,
            cluster_mass: Some(p.cluster_mass),
            distance: Some(p.distance),
        })
        .collect();
    Ok(SelectionResult { picks })
}

/// Full chunked pass: precision, shortlist, batch.
pub fn acquire(
    train: &mut dyn FeatureSource,
    pool: &mut dyn FeatureSource,
    rule: BatchRule,
    batch: usize,
    cfg: &PipelineConfig,
    meter: &ScratchMeter,
) -> Result<(SelectionResult, AcquisitionStats)> {
    let start = Instant::now();
    if train.dim() != pool.dim() {
        return Err(Error::DimMismatch { expected: train.dim(), got: pool.dim() });
    }
    if batch == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if cfg.shortlist < batch {
        return Err(Error::invalid(format!(
            "shortlist size K = {} is smaller than batch size B = {batch}",
            cfg.shortlist
        )));
    }
    let d = pool.dim();
    let state = build_precision(train, cfg, meter)?;
    let _state = meter.track(state.footprint_bytes());
    let entries = stream_shortlist(pool, &state, cfg, meter)?;
    let selection = match rule {
        BatchRule::Lcmd => lcmd_over_shortlist(&entries, pool, train, batch, cfg.chunk, meter)?,
        BatchRule::Greedy => SelectionResult {
            picks: entries.iter().take(batch).map(|e| Pick::scored(e.index, e.score)).collect(),
        },
    };
    let stats = AcquisitionStats {
        train_rows: train.rows(),
        pool_rows: pool.rows(),
        dim: d,
        chunk: cfg.chunk,
        shortlist: cfg.shortlist,
        scores_computed: pool.rows(),
        scratch_peak_bytes: meter.peak(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((selection, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::source::{GeneratedSource, SliceSource};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rows(seed: u64, n: usize, d: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn chunk_size_does_not_change_anything() {
        let d = 6;
        let train = rows(1, 15, d);
        let pool = rows(2, 80, d);
        let run = |chunk: usize| {
            let cfg = PipelineConfig { ridge: 1e-3, shortlist: 30, chunk, parallel: false };
            let meter = ScratchMeter::new();
            let mut t = SliceSource::new(&train, d).unwrap();
            let mut p = SliceSource::new(&pool, d).unwrap();
            let state = build_precision(&mut t, &cfg, &meter).unwrap();
            let entries = stream_shortlist(&mut p, &state, &cfg, &meter).unwrap();
            let sel = lcmd_over_shortlist(&entries, &mut p, &mut t, 5, chunk, &meter).unwrap();
            (state.inverse().unwrap().to_vec(), entries, sel)
        };
        let base = run(80);
        for c in [1, 3, 17] {
            assert_eq!(run(c), base);
        }
    }

    #[test]
    fn scratch_does_not_depend_on_pool_size() {
        let d = 8;
        let peak = |n_pool: usize| {
            let cfg = PipelineConfig { ridge: 1e-4, shortlist: 20, chunk: 32, parallel: false };
            let meter = ScratchMeter::new();
            let train = rows(3, 10, d);
            let mut t = SliceSource::new(&train, d).unwrap();
            let mut p = GeneratedSource::new(n_pool, d, |r, out: &mut [f64]| {
                for (k, v) in out.iter_mut().enumerate() {
                    *v = ((r * 31 + k * 7) % 13) as f64 - 6.0;
                }
            });
            acquire(&mut t, &mut p, BatchRule::Lcmd, 5, &cfg, &meter).unwrap().1.scratch_peak_bytes
        };
        assert_eq!(peak(100), peak(5000));
    }

    #[test]
    fn parallel_scores_match() {
        let d = 5;
        let train = rows(4, 12, d);
        let pool = rows(5, 200, d);
        let go = |parallel| {
            let cfg = PipelineConfig { parallel, chunk: 16, shortlist: 10, ..Default::default() };
            let meter = ScratchMeter::new();
            let state = build_precision(&mut SliceSource::new(&train, d).unwrap(), &cfg, &meter).unwrap();
            stream_shortlist(&mut SliceSource::new(&pool, d).unwrap(), &state, &cfg, &meter).unwrap()
        };
        let (a, b) = (go(false), go(true));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.index, y.index);
            assert!((x.score - y.score).abs() <= 1e-8 * x.score);
        }
    }

    #[test]
    fn argument_checks() {
        let d = 2;
        let train = [1.0, 0.0];
        let pool = [0.0, 1.0, 1.0, 1.0];
        let meter = ScratchMeter::new();
        let cfg = PipelineConfig { shortlist: 1, ..Default::default() };
        let mut t = SliceSource::new(&train, d).unwrap();
        let mut p = SliceSource::new(&pool, d).unwrap();
        assert!(acquire(&mut t, &mut p, BatchRule::Greedy, 2, &cfg, &meter).is_err());
        let mut bad = SliceSource::new(&[1.0, 2.0, 3.0], 3).unwrap();
        assert!(matches!(
            acquire(&mut t, &mut bad, BatchRule::Greedy, 1, &cfg, &meter),
            Err(Error::DimMismatch { .. })
        ));
        let cfg = PipelineConfig { shortlist: 2, ..Default::default() };
        let (sel, stats) = acquire(&mut t, &mut p, BatchRule::Lcmd, 2, &cfg, &meter).unwrap();
        assert_eq!(sel.len(), 2);
        assert_eq!(stats.scores_computed, 2);
    }
}
