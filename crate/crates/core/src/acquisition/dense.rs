//! Non-chunked comparison path that materialises the full kernel over the
//! training and pool rows. Used by the scaling benchmark only; its scratch
//! grows quadratically with the number of rows.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::linalg::dot;
use super::meter::ScratchMeter;
use super::pipeline::{AcquisitionStats, BatchRule, PipelineConfig};
use super::select::{Pick, SelectionResult};
use super::shortlist::top_k;
use crate::error::{Error, Result};

/// Packed upper triangle of a symmetric `n × n` matrix.
struct Packed<'m> {
    n: usize,
    data: super::meter::MeteredVec<'m>,
}

impl Packed<'_> {
    fn at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.data[i * self.n - i * (i + 1) / 2 + j]
    }
}

/// Kernel-space posterior variance for every pool row, top-K shortlist, then
/// a batch, all from one dense kernel matrix.
pub fn dense_acquire(
    train: &[f64],
    pool: &[f64],
    dim: usize,
    rule: BatchRule,
    batch: usize,
    cfg: &PipelineConfig,
    meter: &ScratchMeter,
) -> Result<(SelectionResult, AcquisitionStats)> {
    let start = Instant::now();
    cfg.validate()?;
    let (ridge, shortlist) = (cfg.ridge, cfg.shortlist);
    if dim == 0 || !train.len().is_multiple_of(dim) || !pool.len().is_multiple_of(dim) {
        return Err(Error::shape(format!("feature rows do not match dim {dim}")));
    }
    let n_t = train.len() / dim;
    let n_p = pool.len() / dim;
    if n_p == 0 {
        return Err(Error::Empty("candidate pool"));
    }
    let n = n_t + n_p;
    let mut x = meter.buffer(n * dim);
    x[..train.len()].copy_from_slice(train);
    x[train.len()..].copy_from_slice(pool);
    let row = |i: usize| &x[i * dim..(i + 1) * dim];

    let mut kernel = Packed { n, data: meter.buffer(n * (n + 1) / 2) };
    let mut at = 0;
    for i in 0..n {
        for j in i..n {
            kernel.data[at] = dot(row(i), row(j));
            at += 1;
        }
    }

    let _ktt = meter.track(8 * n_t * n_t);
    let chol = DMatrix::from_fn(n_t, n_t, |i, j| kernel.at(i, j) + if i == j { ridge } else { 0.0 })
        .cholesky()
        .ok_or_else(|| Error::Factorization("training kernel is not positive definite".into()))?;
    let mut variance = meter.buffer(n_p);
    for c in 0..n_p {
        let x_idx = n_t + c;
        let kt = DVector::from_fn(n_t, |i, _| kernel.at(i, x_idx));
        let v = chol.l().solve_lower_triangular(&kt).expect("Cholesky factor is invertible");
        variance[c] = kernel.at(x_idx, x_idx) - v.dot(&v);
    }
    let entries = top_k(&variance, shortlist)?;
    let picks = match rule {
        BatchRule::Greedy => entries.iter().take(batch).map(|e| Pick::scored(e.index, e.score)).collect(),
        BatchRule::Lcmd => {
            let members: Vec<usize> = entries.iter().map(|e| n_t + e.index).collect();
            kernel_lcmd(&kernel, n_t, &members, batch)?
                .into_iter()
                .map(|(pos, mass, dist)| Pick {
                    index: entries[pos].index,
                    score: entries[pos].score,
                    cluster_mass: Some(mass),
                    distance: Some(dist),
                })
                .collect()
        }
    };
    let stats = AcquisitionStats {
        train_rows: n_t,
        pool_rows: n_p,
        dim,
        chunk: n_p,
        shortlist,
        scores_computed: n_p,
        scratch_peak_bytes: meter.peak(),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((SelectionResult { picks }, stats))
}

/// LCMD with kernel-induced distances `k(x,x) + k(z,z) − 2k(x,z)`.
fn kernel_lcmd(kernel: &Packed, n_t: usize, members: &[usize], batch: usize) -> Result<Vec<(usize, f64, f64)>> {
    if n_t == 0 {
        return Err(Error::Empty("centre set"));
    }
    let d2 = |a: usize, b: usize| kernel.at(a, a) + kernel.at(b, b) - 2.0 * kernel.at(a, b);
    let mut centres: Vec<usize> = (0..n_t).collect();
    let mut taken = vec![false; members.len()];
    let mut out = Vec::new();
    for _ in 0..batch.min(members.len()) {
        let mut mass = vec![0.0; centres.len()];
        let mut occupied = vec![false; centres.len()];
        let mut assign = vec![(0usize, 0.0f64); members.len()];
        for (j, &m) in members.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let mut best = (0, d2(m, centres[0]));
            for (c, &z) in centres.iter().enumerate().skip(1) {
                let v = d2(m, z);
                if v < best.1 {
                    best = (c, v);
                }
            }
            assign[j] = best;
            mass[best.0] += best.1;
            occupied[best.0] = true;
        }
        let cluster = (0..centres.len())
            .filter(|&c| occupied[c])
            .fold(None, |acc: Option<usize>, c| match acc {
                Some(b) if mass[b] >= mass[c] => Some(b),
                _ => Some(c),
            })
            .expect("an unselected member exists");
        let mut pick = None::<usize>;
        for j in 0..members.len() {
            if !taken[j] && assign[j].0 == cluster && pick.is_none_or(|p| assign[j].1 > assign[p].1) {
                pick = Some(j);
            }
        }
        let j = pick.expect("cluster is occupied");
        taken[j] = true;
        out.push((j, mass[cluster], assign[j].1));
        centres.push(members[j]);
    }
    Ok(out)
}
