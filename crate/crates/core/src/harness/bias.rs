//! Controlled pool bias: family weights and frame weights.
//!
//! A structure of family `r` at frame `f` is drawn with weight `w_r·π_f`.
//! Sampling runs in two stages, family first with probability proportional to
//! `w_r` times the family's remaining frame mass, then a frame within it, and
//! never returns the same structure twice. With uniform frame weights the
//! family marginal is `p(r) ∝ w_r·N_r`.

use rand::Rng;

use super::pathways::TaggedStructure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSpec {
    pub family_weights: Vec<f64>,
    pub frame_weights: Vec<f64>,
}

impl BiasSpec {
    pub fn uniform(families: usize, frames: usize) -> Self {
        Self { family_weights: vec![1.0; families], frame_weights: vec![1.0; frames] }
    }

    /// Uniform except for `family`, which gets `factor`.
    pub fn upweighted(families: usize, frames: usize, family: usize, factor: f64) -> Self {
        let mut b = Self::uniform(families, frames);
        b.family_weights[family] = factor;
        b
    }

    pub fn validate(&self) -> Result<()> {
        if self.family_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("family weights must be positive"));
        }
        if self.frame_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
            || !self.frame_weights.iter().any(|w| *w > 0.0)
        {
            return Err(Error::invalid("frame weights must be non-negative and not all zero"));
        }
        Ok(())
    }

    fn weight(&self, s: &TaggedStructure) -> Result<f64> {
        let w = self.family_weights.get(s.family).ok_or_else(|| {
            Error::invalid(format!("no weight for family {} ({} given)", s.family, self.family_weights.len()))
        })?;
        let p = self.frame_weights.get(s.frame).ok_or_else(|| {
            Error::invalid(format!("no weight for frame {} ({} given)", s.frame, self.frame_weights.len()))
        })?;
        Ok(w * p)
    }
}

/// Draws `size` distinct indices from `candidates` (indices into `tagged`).
pub fn biased_pool<R: Rng + ?Sized>(
    tagged: &[TaggedStructure],
    candidates: &[usize],
    bias: &BiasSpec,
    size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    bias.validate()?;
    let families = bias.family_weights.len();
    // per family: (index, frame weight) of remaining members
    let mut members: Vec<Vec<(usize, f64)>> = vec![Vec::new(); families];
    for &i in candidates {
        let s = tagged.get(i).ok_or_else(|| Error::invalid(format!("candidate {i} out of range")))?;
        let w = bias.weight(s)?;
        if w > 0.0 {
            members[s.family].push((i, bias.frame_weights[s.frame]));
        }
    }
    let available: usize = members.iter().map(Vec::len).sum();
    if size > available {
        return Err(Error::invalid(format!(
            "pool of {size} requested but only {available} structures have non-zero weight"
        )));
    }
    let mut mass: Vec<f64> = members.iter().map(|m| m.iter().map(|e| e.1).sum()).collect();
    let mut out = Vec::with_capacity(size);
    for _ in 0..size {
        let total: f64 = (0..families).map(|r| bias.family_weights[r] * mass[r]).sum();
        let mut u = rng.random::<f64>() * total;
        let mut family = (0..families).rev().find(|&r| !members[r].is_empty()).expect("members remain");
        for r in 0..families {
            let w = bias.family_weights[r] * mass[r];
            if u < w && !members[r].is_empty() {
                family = r;
                break;
            }
            u -= w;
        }
        let m = &mut members[family];
        let mut v = rng.random::<f64>() * mass[family];
        let mut pick = m.len() - 1;
        for (k, e) in m.iter().enumerate() {
            if v < e.1 {
                pick = k;
                break;
            }
            v -= e.1;
        }
        let (idx, w) = m.swap_remove(pick);
        mass[family] = if m.is_empty() { 0.0 } else { (mass[family] - w).max(0.0) };
        out.push(idx);
    }
    Ok(out)
}
