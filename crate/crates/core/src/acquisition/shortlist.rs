//! Running top-K over streamed scores.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub index: usize,
    pub score: f64,
}

// Greater means ranked earlier: higher score, then lower index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked(Entry);

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .score
            .total_cmp(&other.0.score)
            .then_with(|| other.0.index.cmp(&self.0.index))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `K` highest-scoring candidates seen so far; ties favour the lower index.
#[derive(Debug, Clone)]
pub struct Shortlist {
    capacity: usize,
    heap: BinaryHeap<Reverse<Ranked>>,
}

impl Shortlist {
    /// Bytes per retained entry, used for scratch accounting.
    pub const ENTRY_BYTES: usize = std::mem::size_of::<Entry>();

    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("shortlist size K must be at least 1"));
        }
        Ok(Self { capacity, heap: BinaryHeap::with_capacity(capacity + 1) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Offers a candidate; returns whether it is currently retained.
    pub fn offer(&mut self, index: usize, score: f64) -> Result<bool> {
        if score.is_nan() {
            return Err(Error::NonFinite(format!("score of candidate {index} is NaN")));
        }
        let item = Ranked(Entry { index, score });
        if self.heap.len() < self.capacity {
            self.heap.push(Reverse(item));
            return Ok(true);
        }
        let worst = self.heap.peek().expect("capacity is at least 1").0;
        if item > worst {
            self.heap.pop();
            self.heap.push(Reverse(item));
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// Lowest retained score, if any.
    pub fn threshold(&self) -> Option<f64> {
        self.heap.peek().map(|r| r.0 .0.score)
    }

    /// Entries ranked best first.
    pub fn into_ranked(self) -> Vec<Entry> {
        let mut v: Vec<Ranked> = self.heap.into_iter().map(|r| r.0).collect();
        v.sort_by(|a, b| b.cmp(a));
        v.into_iter().map(|r| r.0).collect()
    }
}

/// Top `k` of a complete score list, ranked best first.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<Entry>> {
    let mut s = Shortlist::new(k)?;
    for (i, &v) in scores.iter().enumerate() {
        s.offer(i, v)?;
    }
    Ok(s.into_ranked())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted_reference(scores: &[f64], k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }

    #[test]
    fn equal_scores_keep_lowest_indices() {
        let got: Vec<usize> = top_k(&[1.0; 10], 4).unwrap().iter().map(|e| e.index).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn capacity_above_pool_keeps_everything() {
        let got = top_k(&[0.3, 0.1, 0.2], 10).unwrap();
        assert_eq!(got.iter().map(|e| e.index).collect::<Vec<_>>(), vec![0, 2, 1]);
    }

    #[test]
    fn rejects_zero_capacity_and_nan() {
        assert!(Shortlist::new(0).is_err());
        let mut s = Shortlist::new(2).unwrap();
        assert!(s.offer(0, f64::NAN).is_err());
    }

    #[test]
    fn threshold_tracks_worst_entry() {
        let mut s = Shortlist::new(2).unwrap();
        s.offer(0, 5.0).unwrap();
        s.offer(1, 3.0).unwrap();
        assert!(!s.offer(2, 3.0).unwrap());
        assert!(s.offer(3, 4.0).unwrap());
        assert_eq!(s.threshold(), Some(4.0));
    }

    proptest! {
        #[test]
        fn matches_full_sort(scores in prop::collection::vec(0u8..6, 1..60), k in 1usize..70) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let got: Vec<usize> = top_k(&scores, k).unwrap().iter().map(|e| e.index).collect();
            prop_assert_eq!(got, sorted_reference(&scores, k));
        }
    }
}
