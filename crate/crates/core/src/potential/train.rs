//! Mini-batch SGD on a Huber energy/force objective.
//!
//! Per structure the loss is
//! `λ_E·H(ΔE/N) + λ_F·mean_{i,α} H(ΔF_iα)`, averaged over the batch.

use rand::seq::SliceRandom;
use rand::Rng;

use super::model;
use super::params::{DescriptorConfig, ModelParams};
use super::structure::{LabeledStructure, Vec3};
use crate::error::{Error, Result};

/// Batch size, learning rate and epoch count for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Schedule {
    /// Dynamic schedule for very small labelled sets:
    /// `(1, 1e-3)` up to 20 structures, `(2, 5e-3)` up to 100, `(4, 5e-3)` above,
    /// with `max(10, ⌈1000·B/|T|⌉)` epochs.
    pub fn small_dataset(n_train: usize) -> Self {
        let (batch_size, learning_rate) = match n_train {
            0..=20 => (1, 1e-3),
            21..=100 => (2, 5e-3),
            _ => (4, 5e-3),
        };
        let n = n_train.max(1);
        let epochs = (1000usize * batch_size).div_ceil(n).max(10);
        Self { batch_size, learning_rate, epochs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleRule {
    SmallDataset,
    Fixed(Schedule),
}

impl ScheduleRule {
    pub fn resolve(self, n_train: usize) -> Schedule {
        match self {
            Self::SmallDataset => Schedule::small_dataset(n_train),
            Self::Fixed(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub schedule: ScheduleRule,
    pub energy_weight: f64,
    pub force_weight: f64,
    pub huber_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleRule::SmallDataset,
            energy_weight: 10.0,
            force_weight: 10.0,
            huber_delta: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub schedule: Schedule,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

pub fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn huber_grad(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Loss of one structure and, optionally, its parameter gradient.
fn sample_loss(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    sample: &LabeledStructure,
    tc: &TrainConfig,
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    let n = sample.structure.n_atoms() as f64;
    let comps = 3.0 * n;
    let delta = tc.huber_delta;
    let mut loss = 0.0;
    let weights = |e: f64, f: &[Vec3]| {
        let de = (e - sample.energy) / n;
        loss += tc.energy_weight * huber(de, delta);
        let mut coef = vec![[0.0; 3]; f.len()];
        let mut force_loss = 0.0;
        for ((c, fp), fr) in coef.iter_mut().zip(f).zip(&sample.forces) {
            for a in 0..3 {
                let r = fp[a] - fr[a];
                force_loss += huber(r, delta);
                c[a] = tc.force_weight * huber_grad(r, delta) / comps;
            }
        }
        loss += tc.force_weight * force_loss / comps;
        if with_grad {
            (tc.energy_weight * huber_grad(de, delta) / n, coef)
        } else {
            (0.0, vec![[0.0; 3]; f.len()])
        }
    };
    let (_, _, grad) = model::weighted_gradient(params, cfg, &sample.structure, weights)?;
    Ok((loss, with_grad.then_some(grad)))
}

/// Mean loss over a dataset.
pub fn dataset_loss(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    data: &[LabeledStructure],
    tc: &TrainConfig,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut total = 0.0;
    for s in data {
        total += sample_loss(params, cfg, s, tc, false)?.0;
    }
    Ok(total / data.len() as f64)
}

/// Mean loss and gradient over a batch.
pub fn batch_gradient(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    batch: &[&LabeledStructure],
    tc: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; params.n_params()];
    let mut loss = 0.0;
    for s in batch {
        let (l, g) = sample_loss(params, cfg, s, tc, true)?;
        loss += l;
        for (acc, v) in grad.iter_mut().zip(g.expect("gradient requested")) {
            *acc += v;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, grad))
}

/// Runs the configured schedule from `init` and returns the trained parameters.
pub fn train<R: Rng + ?Sized>(
    init: &ModelParams,
    cfg: &DescriptorConfig,
    data: &[LabeledStructure],
    tc: &TrainConfig,
    rng: &mut R,
) -> Result<(ModelParams, TrainReport)> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let schedule = tc.schedule.resolve(data.len());
    if schedule.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let initial_loss = dataset_loss(init, cfg, data, tc)?;
    let mut params = init.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut steps = 0;
    for epoch in 0..schedule.epochs {
        order.shuffle(rng);
        for idx in order.chunks(schedule.batch_size) {
            let batch: Vec<&LabeledStructure> = idx.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = batch_gradient(&params, cfg, &batch, tc)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "training loss {loss} at epoch {epoch}, step {steps}"
                )));
            }
            params.axpy(-schedule.learning_rate, &grad);
            steps += 1;
        }
    }
    let final_loss = dataset_loss(&params, cfg, data, tc)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFinite(format!("final training loss {final_loss}")));
    }
    Ok((params, TrainReport { schedule, steps, initial_loss, final_loss }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::params::ModelDims;
    use crate::potential::structure::Structure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(hidden: usize) -> ModelDims {
        ModelDims { n_species: 2, emb_dim: 3, n_radial: 8, hidden }
    }

    fn random_structure(rng: &mut ChaCha8Rng) -> Structure {
        loop {
            let n = rng.random_range(2..6);
            let species = (0..n).map(|_| rng.random_range(0..2)).collect();
            let positions = (0..n)
                .map(|_| [rng.random_range(0.0..2.5), rng.random_range(0.0..2.5), rng.random_range(0.0..2.5)])
                .collect();
            let s = Structure::new(species, positions).unwrap();
            if s.min_pair_distance() > 0.8 {
                return s;
            }
        }
    }

    fn labelled(teacher: &ModelParams, cfg: &DescriptorConfig, x: Structure) -> LabeledStructure {
        let (e, f) = model::energy_and_forces(teacher, cfg, &x).unwrap();
        LabeledStructure::new(x, e, f).unwrap()
    }

    #[test]
    fn schedule_thresholds() {
        let s = Schedule::small_dataset(15);
        assert_eq!((s.batch_size, s.learning_rate), (1, 1e-3));
        assert_eq!(s.epochs, 67);
        let s = Schedule::small_dataset(20);
        assert_eq!((s.batch_size, s.epochs), (1, 50));
        let s = Schedule::small_dataset(21);
        assert_eq!((s.batch_size, s.learning_rate), (2, 5e-3));
        let s = Schedule::small_dataset(100);
        assert_eq!((s.batch_size, s.epochs), (2, 20));
        let s = Schedule::small_dataset(101);
        assert_eq!((s.batch_size, s.learning_rate), (4, 5e-3));
        assert_eq!(Schedule::small_dataset(1000).epochs, 10);
    }

    #[test]
    fn huber_is_continuous_at_delta() {
        let d = 0.01;
        assert!((huber(d, d) - huber(d * (1.0 + 1e-12), d)).abs() < 1e-15);
        assert_eq!(huber_grad(1.0, d), d);
        assert_eq!(huber_grad(-1.0, d), -d);
        assert_eq!(huber_grad(0.003, d), 0.003);
    }

    #[test]
    fn exact_labels_leave_params_unchanged() {
        let cfg = DescriptorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = ModelParams::init(dims(4), &mut rng);
        let data: Vec<_> = (0..6).map(|_| labelled(&model, &cfg, random_structure(&mut rng))).collect();
        let (out, report) = train(&model, &cfg, &data, &TrainConfig::default(), &mut rng).unwrap();
        assert_eq!(out, model);
        assert_eq!(report.final_loss, 0.0);
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let cfg = DescriptorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let teacher = ModelParams::init(dims(6), &mut rng);
        let student = ModelParams::init(dims(3), &mut rng);
        let data: Vec<_> = (0..3).map(|_| labelled(&teacher, &cfg, random_structure(&mut rng))).collect();
        // a wide Huber window keeps the loss smooth for the difference quotient
        let tc = TrainConfig { huber_delta: 100.0, ..TrainConfig::default() };
        let batch: Vec<&LabeledStructure> = data.iter().collect();
        let (_, g) = batch_gradient(&student, &cfg, &batch, &tc).unwrap();
        let flat = student.flatten();
        let h = 1e-6;
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..flat.len() {
            let mut up = flat.clone();
            up[k] += h;
            let mut dn = flat.clone();
            dn[k] -= h;
            let lp = batch_gradient(&ModelParams::from_flat(student.dims, &up).unwrap(), &cfg, &batch, &tc).unwrap().0;
            let lm = batch_gradient(&ModelParams::from_flat(student.dims, &dn).unwrap(), &cfg, &batch, &tc).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[k]).abs() / scale < 1e-6, "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let cfg = DescriptorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = ModelParams::init(dims(4), &mut rng);
        assert!(matches!(
            train(&model, &cfg, &[], &TrainConfig::default(), &mut rng),
            Err(Error::Empty(_))
        ));
    }
}
