//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, lists are comma-separated. Every
//! key has a default, so an empty file is a valid configuration. Unknown keys
//! and unparsable values are reported by key name.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::str::FromStr;

use crate::acquisition::PipelineConfig;
use crate::error::{Error, Result};
use crate::harness::{AlConfig, BenchmarkSpec, BiasSpec, Method};
use crate::kernels::{FeatureMap, JointWeights, Precision};
use crate::potential::{DescriptorConfig, ModelDims, ParamSubset, Schedule};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub feature_map: String,
    pub subset: ParamSubset,
    pub weight_energy: f64,
    pub weight_force: f64,
    /// Selection rule for `acquire`: `lcmd` or `greedy`.
    pub selection: String,
    pub methods: Vec<String>,
    pub ridge: f64,
    pub shortlist: usize,
    pub chunk: usize,
    pub batch: usize,
    pub rounds: usize,
    pub seeds: usize,
    pub committee_size: usize,
    pub feature_precision: Precision,

    pub instances: Vec<usize>,
    pub frames: usize,
    pub atoms_min: usize,
    pub atoms_max: usize,
    pub n_species: usize,
    pub species_per_family: usize,
    pub spacing_min: f64,
    pub spacing_max: f64,
    pub perturbation: f64,
    pub jitter: f64,
    pub reaction_shift: f64,
    pub min_distance: f64,
    pub pool_size: usize,
    pub initial: usize,
    pub test_per_family: usize,
    /// Family index to up-weight; `none` for unit weights.
    pub bias_family: Option<usize>,
    pub bias_factor: f64,
    /// Empty means uniform.
    pub frame_weights: Vec<f64>,

    pub emb_dim: usize,
    pub hidden: usize,
    pub cutoff: f64,
    pub n_radial: usize,
    pub rbf_width: f64,
    pub pretrain_size: usize,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,

    pub bench_pool_sizes: Vec<usize>,
    pub bench_train_rows: usize,
    pub bench_dim: usize,
    pub bench_dense: bool,
    pub bench_dense_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = BenchmarkSpec::default();
        let p = &spec.pathways;
        let pipe = PipelineConfig::default();
        let al = AlConfig::default();
        Self {
            feature_map: "ntk-ef".into(),
            subset: ParamSubset::All,
            weight_energy: 1.0,
            weight_force: 1.0,
            selection: "lcmd".into(),
            methods: ["random", "ntk-e", "ntk-f", "ntk-ef", "activation"].map(String::from).to_vec(),
            ridge: pipe.ridge,
            shortlist: pipe.shortlist,
            chunk: pipe.chunk,
            batch: al.batch,
            rounds: al.rounds,
            seeds: 5,
            committee_size: al.committee_size,
            feature_precision: Precision::F64,
            instances: p.instances.clone(),
            frames: p.frames,
            atoms_min: p.atoms.0,
            atoms_max: p.atoms.1,
            n_species: p.n_species,
            species_per_family: p.species_per_family,
            spacing_min: p.spacing.0,
            spacing_max: p.spacing.1,
            perturbation: p.perturbation,
            jitter: p.jitter,
            reaction_shift: p.reaction_shift,
            min_distance: p.min_distance,
            pool_size: spec.pool_size,
            initial: spec.initial,
            test_per_family: spec.test_per_family,
            bias_family: None,
            bias_factor: 5.0,
            frame_weights: Vec::new(),
            emb_dim: spec.student.emb_dim,
            hidden: spec.student.hidden,
            cutoff: spec.descriptor.cutoff,
            n_radial: spec.descriptor.n_radial(),
            rbf_width: spec.descriptor.width,
            pretrain_size: spec.pretrain_size,
            pretrain_epochs: spec.pretrain_schedule.epochs,
            pretrain_lr: spec.pretrain_schedule.learning_rate,
            bench_pool_sizes: vec![10_000, 20_000, 50_000, 100_000, 200_000],
            bench_train_rows: 1000,
            bench_dim: 128,
            bench_dense: false,
            bench_dense_max: 20_000,
        }
    }
}

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

fn scalar<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| bad(key, format!("cannot parse '{raw}'")))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| scalar(key, s)).collect()
}

fn boolean(key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got '{raw}'"))),
    }
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: n + 1, msg: format!("expected 'key = value', got '{line}'") })?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), n + 1) {
                return Err(bad(key, format!("set twice (lines {prev} and {})", n + 1)));
            }
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "feature_map" => self.feature_map = v.to_string(),
            "subset" => self.subset = v.parse().map_err(|e: Error| bad(key, e.to_string()))?,
            "weight_energy" => self.weight_energy = scalar(key, v)?,
            "weight_force" => self.weight_force = scalar(key, v)?,
            "selection" => self.selection = v.to_ascii_lowercase(),
            "methods" => self.methods = list(key, v)?,
            "ridge" => self.ridge = scalar(key, v)?,
            "shortlist" => self.shortlist = scalar(key, v)?,
            "chunk" => self.chunk = scalar(key, v)?,
            "batch" => self.batch = scalar(key, v)?,
            "rounds" => self.rounds = scalar(key, v)?,
            "seeds" => self.seeds = scalar(key, v)?,
            "committee_size" => self.committee_size = scalar(key, v)?,
            "feature_precision" => {
                self.feature_precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(bad(key, format!("expected f32 or f64, got '{v}'"))),
                }
            }
            "instances" => self.instances = list(key, v)?,
            "frames" => self.frames = scalar(key, v)?,
            "atoms_min" => self.atoms_min = scalar(key, v)?,
            "atoms_max" => self.atoms_max = scalar(key, v)?,
            "n_species" => self.n_species = scalar(key, v)?,
            "species_per_family" => self.species_per_family = scalar(key, v)?,
            "spacing_min" => self.spacing_min = scalar(key, v)?,
            "spacing_max" => self.spacing_max = scalar(key, v)?,
            "perturbation" => self.perturbation = scalar(key, v)?,
            "jitter" => self.jitter = scalar(key, v)?,
            "reaction_shift" => self.reaction_shift = scalar(key, v)?,
            "min_distance" => self.min_distance = scalar(key, v)?,
            "pool_size" => self.pool_size = scalar(key, v)?,
            "initial" => self.initial = scalar(key, v)?,
            "test_per_family" => self.test_per_family = scalar(key, v)?,
            "bias_family" => {
                self.bias_family = if v.eq_ignore_ascii_case("none") { None } else { Some(scalar(key, v)?) }
            }
            "bias_factor" => self.bias_factor = scalar(key, v)?,
            "frame_weights" => self.frame_weights = list(key, v)?,
            "emb_dim" => self.emb_dim = scalar(key, v)?,
            "hidden" => self.hidden = scalar(key, v)?,
            "cutoff" => self.cutoff = scalar(key, v)?,
            "n_radial" => self.n_radial = scalar(key, v)?,
            "rbf_width" => self.rbf_width = scalar(key, v)?,
            "pretrain_size" => self.pretrain_size = scalar(key, v)?,
            "pretrain_epochs" => self.pretrain_epochs = scalar(key, v)?,
            "pretrain_lr" => self.pretrain_lr = scalar(key, v)?,
            "bench_pool_sizes" => self.bench_pool_sizes = list(key, v)?,
            "bench_train_rows" => self.bench_train_rows = scalar(key, v)?,
            "bench_dim" => self.bench_dim = scalar(key, v)?,
            "bench_dense" => self.bench_dense = boolean(key, v)?,
            "bench_dense_max" => self.bench_dense_max = scalar(key, v)?,
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    /// Checks every derived object so errors surface before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.feature_map()?;
        for m in &self.methods {
            self.method(m)?;
        }
        if !matches!(self.selection.as_str(), "lcmd" | "greedy") {
            return Err(bad("selection", format!("expected lcmd or greedy, got '{}'", self.selection)));
        }
        self.pipeline(false).validate().map_err(|e| bad("ridge/shortlist/chunk", e.to_string()))?;
        if self.seeds == 0 {
            return Err(bad("seeds", "need at least one seed"));
        }
        if self.committee_size < 2 {
            return Err(bad("committee_size", "a committee needs at least two members"));
        }
        if self.bench_dim == 0 || self.bench_pool_sizes.is_empty() || self.bench_pool_sizes.contains(&0) {
            return Err(bad("bench_pool_sizes", "need positive pool sizes and dimension"));
        }
        self.benchmark_spec()?.validate()
    }

    pub fn weights(&self) -> Result<JointWeights> {
        JointWeights::new(self.weight_energy, self.weight_force).map_err(|e| bad("weight_energy", e.to_string()))
    }

    pub fn feature_map(&self) -> Result<FeatureMap> {
        FeatureMap::parse(&self.feature_map, self.subset, self.weights()?)
            .map_err(|e| bad("feature_map", e.to_string()))
    }

    pub fn method(&self, name: &str) -> Result<Method> {
        Method::parse(name, self.subset, self.weights()?).map_err(|e| bad("methods", e.to_string()))
    }

    pub fn pipeline(&self, parallel: bool) -> PipelineConfig {
        PipelineConfig { ridge: self.ridge, shortlist: self.shortlist, chunk: self.chunk, parallel }
    }

    pub fn al_config(&self, parallel: bool) -> AlConfig {
        AlConfig {
            rounds: self.rounds,
            batch: self.batch,
            pipeline: self.pipeline(parallel),
            committee_size: self.committee_size,
            ..AlConfig::default()
        }
    }

    pub fn descriptor(&self) -> Result<DescriptorConfig> {
        DescriptorConfig::equally_spaced(self.cutoff, self.n_radial, self.rbf_width)
            .map_err(|e| bad("cutoff/n_radial/rbf_width", e.to_string()))
    }

    pub fn student_dims(&self) -> ModelDims {
        ModelDims { n_species: self.n_species, emb_dim: self.emb_dim, n_radial: self.n_radial, hidden: self.hidden }
    }

    pub fn benchmark_spec(&self) -> Result<BenchmarkSpec> {
        let defaults = BenchmarkSpec::default();
        let families = self.instances.len();
        let frame_weights = if self.frame_weights.is_empty() { vec![1.0; self.frames] } else { self.frame_weights.clone() };
        let mut family_weights = vec![1.0; families];
        if let Some(r) = self.bias_family {
            *family_weights.get_mut(r).ok_or_else(|| bad("bias_family", format!("only {families} families")))? =
                self.bias_factor;
        }
        let bias = BiasSpec { family_weights, frame_weights };
        let pathways = crate::harness::PathwaySpec {
            instances: self.instances.clone(),
            frames: self.frames,
            atoms: (self.atoms_min, self.atoms_max),
            n_species: self.n_species,
            species_per_family: self.species_per_family,
            spacing: (self.spacing_min, self.spacing_max),
            perturbation: self.perturbation,
            jitter: self.jitter,
            reaction_shift: self.reaction_shift,
            min_distance: self.min_distance,
        };
        Ok(BenchmarkSpec {
            pathways,
            bias: Some(bias),
            pool_size: self.pool_size,
            initial: self.initial,
            test_per_family: self.test_per_family,
            student: self.student_dims(),
            descriptor: self.descriptor()?,
            pretrain_size: self.pretrain_size,
            pretrain_schedule: Schedule { epochs: self.pretrain_epochs, learning_rate: self.pretrain_lr, ..defaults.pretrain_schedule },
        })
    }
}

impl Display for RunConfig {
    /// Writes every key with its effective value; parsing the output gives
    /// back the same configuration.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let precision = match self.feature_precision {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        };
        let bias_family = self.bias_family.map_or("none".to_string(), |r| r.to_string());
        let rows = [
            ("feature_map", self.feature_map.clone()),
            ("subset", self.subset.name().to_string()),
            ("weight_energy", self.weight_energy.to_string()),
            ("weight_force", self.weight_force.to_string()),
            ("selection", self.selection.clone()),
            ("methods", join(&self.methods)),
            ("ridge", self.ridge.to_string()),
            ("shortlist", self.shortlist.to_string()),
            ("chunk", self.chunk.to_string()),
            ("batch", self.batch.to_string()),
            ("rounds", self.rounds.to_string()),
            ("seeds", self.seeds.to_string()),
            ("committee_size", self.committee_size.to_string()),
            ("feature_precision", precision.to_string()),
            ("instances", join(&self.instances)),
            ("frames", self.frames.to_string()),
            ("atoms_min", self.atoms_min.to_string()),
            ("atoms_max", self.atoms_max.to_string()),
            ("n_species", self.n_species.to_string()),
            ("species_per_family", self.species_per_family.to_string()),
            ("spacing_min", self.spacing_min.to_string()),
            ("spacing_max", self.spacing_max.to_string()),
            ("perturbation", self.perturbation.to_string()),
            ("jitter", self.jitter.to_string()),
            ("reaction_shift", self.reaction_shift.to_string()),
            ("min_distance", self.min_distance.to_string()),
            ("pool_size", self.pool_size.to_string()),
            ("initial", self.initial.to_string()),
            ("test_per_family", self.test_per_family.to_string()),
            ("bias_family", bias_family),
            ("bias_factor", self.bias_factor.to_string()),
            ("frame_weights", join(&self.frame_weights)),
            ("emb_dim", self.emb_dim.to_string()),
            ("hidden", self.hidden.to_string()),
            ("cutoff", self.cutoff.to_string()),
            ("n_radial", self.n_radial.to_string()),
            ("rbf_width", self.rbf_width.to_string()),
            ("pretrain_size", self.pretrain_size.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("pretrain_lr", self.pretrain_lr.to_string()),
            ("bench_pool_sizes", join(&self.bench_pool_sizes)),
            ("bench_train_rows", self.bench_train_rows.to_string()),
            ("bench_dim", self.bench_dim.to_string()),
            ("bench_dense", self.bench_dense.to_string()),
            ("bench_dense_max", self.bench_dense_max.to_string()),
        ];
        for (k, v) in rows {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn echo_round_trips() {
        let text = "batch = 7\nmethods = random, lcmd:ntk-f\nbias_family = 2\nframe_weights = 0, 1, 1, 1, 1, 1, 1, 1, 1, 0\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.batch, 7);
        assert_eq!(cfg.bias_family, Some(2));
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("ridg = 1", "ridg"),
            ("ridge = abc", "ridge"),
            ("methods = random, bogus", "methods"),
            ("subset = everything", "subset"),
            ("bench_dense = maybe", "bench_dense"),
            ("batch = 1\nbatch = 2", "batch"),
        ];
        for (text, key) in cases {
            match RunConfig::parse(text) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(RunConfig::parse("no equals sign"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn ridge_must_be_positive() {
        assert!(RunConfig::parse("ridge = 0").is_err());
        assert!(RunConfig::parse("ridge = -1e-3").is_err());
    }
}
