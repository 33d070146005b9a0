//! Query-by-committee disagreement scores.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::potential::Vec3;

/// One member's prediction for one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub energy: f64,
    pub forces: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitteeMode {
    Energy,
    Force,
}

impl FromStr for CommitteeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" | "e" => Ok(Self::Energy),
            "force" | "f" => Ok(Self::Force),
            _ => Err(Error::UnknownName { kind: "committee mode", name: s.to_string() }),
        }
    }
}

/// Per-candidate energy variance (eV²) and mean per-atom force variance
/// (eV²/Å²) across committee members.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitteeScores {
    pub energy: Vec<f64>,
    pub force: Vec<f64>,
}

impl CommitteeScores {
    pub fn by(&self, mode: CommitteeMode) -> &[f64] {
        match mode {
            CommitteeMode::Energy => &self.energy,
            CommitteeMode::Force => &self.force,
        }
    }
}

/// Population variance, shifted by the first value so identical inputs give
/// exactly zero.
fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let first = it.next().unwrap_or(0.0);
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - first;
        n += 1.0;
        s += d;
        s2 += d * d;
    }
    let mean = s / n;
    (s2 / n - mean * mean).max(0.0)
}

/// `members[m][c]` is member `m`'s prediction for candidate `c`.
pub fn committee_scores(members: &[Vec<Prediction>]) -> Result<CommitteeScores> {
    if members.len() < 2 {
        return Err(Error::invalid(format!("committee needs at least 2 members, got {}", members.len())));
    }
    let n = members[0].len();
    if let Some(m) = members.iter().position(|m| m.len() != n) {
        return Err(Error::shape(format!("member {m} has {} predictions, member 0 has {n}", members[m].len())));
    }
    let mut energy = Vec::with_capacity(n);
    let mut force = Vec::with_capacity(n);
    for c in 0..n {
        let atoms = members[0][c].forces.len();
        if atoms == 0 || members.iter().any(|m| m[c].forces.len() != atoms) {
            return Err(Error::shape(format!("inconsistent force shapes for candidate {c}")));
        }
        energy.push(variance(members.iter().map(|m| m[c].energy)));
        let mut total = 0.0;
        for i in 0..atoms {
            for a in 0..3 {
                total += variance(members.iter().map(|m| m[c].forces[i][a]));
            }
        }
        force.push(total / atoms as f64);
    }
    Ok(CommitteeScores { energy, force })
}
