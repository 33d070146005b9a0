//! Test-set error metrics. Energies are per atom in meV/atom, forces per
//! Cartesian component in meV/Å.

use crate::error::{Error, Result};
use crate::potential::{LabeledStructure, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub energy_rmse: f64,
    pub energy_mae: f64,
    pub force_rmse: f64,
    pub force_mae: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["energy_rmse", "energy_mae", "force_rmse", "force_mae"];

    pub fn values(&self) -> [f64; 4] {
        [self.energy_rmse, self.energy_mae, self.force_rmse, self.force_mae]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES.iter().position(|n| *n == name).map(|k| self.values()[k])
    }
}

/// Errors of `predictions[k] = (E, F)` against `labels[k]`.
pub fn compute_metrics(predictions: &[(f64, Vec<Vec3>)], labels: &[LabeledStructure]) -> Result<Metrics> {
    if labels.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    let (mut e2, mut e1, mut f2, mut f1, mut comps) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (k, ((e, f), lab)) in predictions.iter().zip(labels).enumerate() {
        if f.len() != lab.forces.len() {
            return Err(Error::shape(format!("structure {k}: {} force vectors for {} atoms", f.len(), lab.forces.len())));
        }
        let de = 1e3 * (e - lab.energy) / lab.structure.n_atoms() as f64;
        e2 += de * de;
        e1 += de.abs();
        for (p, r) in f.iter().zip(&lab.forces) {
            for a in 0..3 {
                let df = 1e3 * (p[a] - r[a]);
                f2 += df * df;
                f1 += df.abs();
            }
        }
        comps += 3 * f.len();
    }
    let n = labels.len() as f64;
    let c = comps as f64;
    Ok(Metrics { energy_rmse: (e2 / n).sqrt(), energy_mae: e1 / n, force_rmse: (f2 / c).sqrt(), force_mae: f1 / c })
}

/// Discrete sum of a metric over acquisition rounds.
pub fn auc(values: &[f64]) -> f64 {
    values.iter().sum()
}
