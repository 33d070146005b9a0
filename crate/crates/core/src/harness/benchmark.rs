//! The synthetic benchmark: teacher, labelled pathways, splits and a
//! pretrained student.

use log::info;
use rand::Rng;

use super::bias::{biased_pool, BiasSpec};
use super::pathways::{generate_pathways, PathwaySpec, TaggedStructure};
use crate::error::{Error, Result};
use crate::potential::{
    self, DescriptorConfig, LabeledStructure, ModelDims, ModelParams, Schedule, ScheduleRule, Structure,
    TrainConfig,
};
use crate::rng::{RootSeed, StreamRng};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub pathways: PathwaySpec,
    /// `None` means unit weights everywhere.
    pub bias: Option<BiasSpec>,
    pub pool_size: usize,
    pub initial: usize,
    pub test_per_family: usize,
    pub student: ModelDims,
    pub descriptor: DescriptorConfig,
    /// Generic teacher-labelled clusters used to pretrain the student.
    pub pretrain_size: usize,
    pub pretrain_schedule: Schedule,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            pathways: PathwaySpec::default(),
            bias: None,
            pool_size: 2000,
            initial: 20,
            test_per_family: 40,
            student: ModelDims { n_species: 4, emb_dim: 4, n_radial: 8, hidden: 16 },
            descriptor: DescriptorConfig::default(),
            pretrain_size: 200,
            pretrain_schedule: Schedule { batch_size: 4, learning_rate: 5e-3, epochs: 20 },
        }
    }
}

impl BenchmarkSpec {
    pub fn bias(&self) -> BiasSpec {
        self.bias
            .clone()
            .unwrap_or_else(|| BiasSpec::uniform(self.pathways.families(), self.pathways.frames))
    }

    pub fn teacher_dims(&self) -> ModelDims {
        ModelDims { hidden: 2 * self.student.hidden, ..self.student }
    }

    pub fn validate(&self) -> Result<()> {
        self.pathways.validate()?;
        self.descriptor.validate()?;
        let bias = self.bias();
        bias.validate()?;
        if bias.family_weights.len() != self.pathways.families() || bias.frame_weights.len() != self.pathways.frames {
            return Err(Error::invalid(format!(
                "bias has {} family and {} frame weights for {} families of {} frames",
                bias.family_weights.len(),
                bias.frame_weights.len(),
                self.pathways.families(),
                self.pathways.frames
            )));
        }
        if self.student.n_radial != self.descriptor.centers.len() {
            return Err(Error::invalid("student radial width must match the descriptor centres"));
        }
        if self.pathways.n_species > self.student.n_species {
            return Err(Error::invalid("pathways use more species than the model knows"));
        }
        if self.initial == 0 {
            return Err(Error::invalid("the initial training set must not be empty"));
        }
        if self.test_per_family == 0 {
            return Err(Error::invalid("the test set must not be empty"));
        }
        Ok(())
    }
}

/// Everything one seed of the benchmark needs.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub teacher: ModelParams,
    pub pretrained: ModelParams,
    pub structures: Vec<TaggedStructure>,
    pub test: Vec<usize>,
    pub initial: Vec<usize>,
    pub pool: Vec<usize>,
}

fn generic_cluster(rng: &mut StreamRng, spec: &BenchmarkSpec) -> Structure {
    let (lo, hi) = spec.pathways.atoms;
    let n = rng.random_range(lo..=hi);
    let side = 1.6 * (n as f64).cbrt() + 0.5;
    loop {
        let species = (0..n).map(|_| rng.random_range(0..spec.pathways.n_species)).collect();
        let pos = (0..n)
            .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side)])
            .collect();
        let s = Structure::new(species, pos).expect("finite coordinates");
        if s.min_pair_distance() >= 0.9 {
            return s;
        }
    }
}

impl Benchmark {
    pub fn build(spec: &BenchmarkSpec, seed: RootSeed) -> Result<Self> {
        spec.validate()?;
        let cfg = &spec.descriptor;
        let teacher = ModelParams::init(spec.teacher_dims(), &mut seed.stream("teacher"));
        let structures = generate_pathways(&spec.pathways, &teacher, cfg, &mut seed.stream("data"))?;

        let mut split = seed.stream("split");
        let mut test = Vec::new();
        for family in 0..spec.pathways.families() {
            let members: Vec<usize> = (0..structures.len()).filter(|&i| structures[i].family == family).collect();
            if members.len() < spec.test_per_family {
                return Err(Error::invalid(format!(
                    "family {family} has {} structures, fewer than {} test structures",
                    members.len(),
                    spec.test_per_family
                )));
            }
            test.extend(rand::seq::index::sample(&mut split, members.len(), spec.test_per_family).iter().map(|k| members[k]));
        }
        let mut is_test = vec![false; structures.len()];
        test.iter().for_each(|&i| is_test[i] = true);
        let rest: Vec<usize> = (0..structures.len()).filter(|&i| !is_test[i]).collect();
        let mut drawn = biased_pool(&structures, &rest, &spec.bias(), spec.initial + spec.pool_size, &mut split)?;
        let pool = drawn.split_off(spec.initial);

        let mut pre_rng = seed.stream("pretrain");
        let generic: Vec<LabeledStructure> = (0..spec.pretrain_size)
            .map(|_| {
                let s = generic_cluster(&mut pre_rng, spec);
                let (e, f) = potential::energy_and_forces(&teacher, cfg, &s)?;
                LabeledStructure::new(s, e, f)
            })
            .collect::<Result<_>>()?;
        let init = ModelParams::init(spec.student, &mut seed.stream("student"));
        let pretrained = if generic.is_empty() {
            init
        } else {
            let tc = TrainConfig { schedule: ScheduleRule::Fixed(spec.pretrain_schedule), ..TrainConfig::default() };
            let (p, report) = potential::train(&init, cfg, &generic, &tc, &mut pre_rng)?;
            info!("pretraining loss {:.4e} -> {:.4e}", report.initial_loss, report.final_loss);
            p
        };
        Ok(Self { spec: spec.clone(), teacher, pretrained, structures, test, initial: drawn, pool })
    }

    pub fn labels(&self, idx: &[usize]) -> Vec<LabeledStructure> {
        idx.iter().map(|&i| self.structures[i].label.clone()).collect()
    }

    pub fn families(&self) -> usize {
        self.spec.pathways.families()
    }
}
