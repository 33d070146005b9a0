//! Selection results, greedy posterior-variance and random selection.

use std::io::Write;

use log::warn;
use rand::Rng;

use super::shortlist::top_k;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    /// Index into the candidate pool.
    pub index: usize,
    pub score: f64,
    pub cluster_mass: Option<f64>,
    pub distance: Option<f64>,
}

impl Pick {
    pub fn scored(index: usize, score: f64) -> Self {
        Self { index, score, cluster_mass: None, distance: None }
    }
}

/// An ordered batch of pool indices with per-pick diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionResult {
    pub picks: Vec<Pick>,
}

impl SelectionResult {
    pub fn indices(&self) -> Vec<usize> {
        self.picks.iter().map(|p| p.index).collect()
    }

    pub fn len(&self) -> usize {
        self.picks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.picks.is_empty()
    }

    pub const CSV_HEADER: &'static str = "round,rank,candidate_index,score,cluster_mass";

    /// Appends `round,rank,candidate_index,score,cluster_mass` rows; the
    /// mass column is empty for methods without clusters.
    pub fn write_csv_rows<W: Write>(&self, mut w: W, round: usize) -> Result<()> {
        for (rank, p) in self.picks.iter().enumerate() {
            let score = if p.score.is_nan() { String::new() } else { format!("{:e}", p.score) };
            let mass = p.cluster_mass.map(|m| format!("{m:e}")).unwrap_or_default();
            writeln!(w, "{round},{rank},{},{score},{mass}", p.index)?;
        }
        Ok(())
    }
}

/// The `batch` highest scores, without reconditioning between picks.
pub fn greedy_pv_select(scores: &[f64], batch: usize) -> Result<SelectionResult> {
    if scores.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if batch == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if batch > scores.len() {
        warn!("batch of {batch} exceeds pool of {}; selecting all", scores.len());
    }
    let picks = top_k(scores, batch)?.into_iter().map(|e| Pick::scored(e.index, e.score)).collect();
    Ok(SelectionResult { picks })
}

/// Uniform sampling without replacement.
pub fn random_select<R: Rng + ?Sized>(pool_size: usize, batch: usize, rng: &mut R) -> Result<SelectionResult> {
    if batch > pool_size {
        return Err(Error::invalid(format!("batch of {batch} exceeds pool of {pool_size}")));
    }
    let picks = rand::seq::index::sample(rng, pool_size, batch)
        .into_iter()
        .map(|i| Pick::scored(i, f64::NAN))
        .collect();
    Ok(SelectionResult { picks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_takes_highest_scores() {
        let s = greedy_pv_select(&[0.1, 0.9, 0.5, 0.7], 2).unwrap();
        assert_eq!(s.indices(), vec![1, 3]);
        assert_eq!(greedy_pv_select(&[0.1, 0.9], 5).unwrap().len(), 2);
    }

    #[test]
    fn random_is_reproducible_and_complete() {
        let a = random_select(50, 7, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = random_select(50, 7, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.indices(), b.indices());
        let mut all = random_select(9, 9, &mut ChaCha8Rng::seed_from_u64(5)).unwrap().indices();
        all.sort();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        assert!(random_select(3, 4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn random_single_draws_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[random_select(10, 1, &mut rng).unwrap().picks[0].index] += 1;
        }
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * 0.1).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn csv_rows() {
        let s = SelectionResult {
            picks: vec![
                Pick { index: 4, score: 0.5, cluster_mass: Some(2.0), distance: Some(1.0) },
                Pick::scored(1, f64::NAN),
            ],
        };
        let mut buf = Vec::new();
        s.write_csv_rows(&mut buf, 3).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3,0,4,5e-1,2e0\n3,1,1,,\n");
    }
}
