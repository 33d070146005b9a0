//! The offline pool-based active-learning loop.
//!
//! Round 0 trains on the initial set. Each later round scores the pool with
//! the current model, moves a batch into the training set with its teacher
//! labels, retrains from the pretrained parameters and evaluates on the fixed
//! test set.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use log::warn;

use super::benchmark::Benchmark;
use super::metrics::{auc, compute_metrics, Metrics};
use crate::acquisition::{
    acquire, committee_scores, greedy_pv_select, random_select, BatchRule, CommitteeMode, PipelineConfig, Prediction,
    ScratchMeter, SelectionResult, SliceSource,
};
use crate::error::{Error, Result};
use crate::kernels::{FeatureMap, JointWeights};
use crate::potential::{self, ModelParams, ParamSubset, Structure, TrainConfig};
use crate::rng::RootSeed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Random,
    /// Posterior-variance shortlist, then LCMD.
    Lcmd(FeatureMap),
    /// Top-B posterior variance over the whole pool.
    GreedyPv(FeatureMap),
    Committee(CommitteeMode),
}

impl Method {
    /// Accepts `random`, a feature-map name (`ntk-e`, `ntk-f`, `ntk-ef`,
    /// `activation`) meaning shortlist + LCMD, `lcmd:<map>`, `greedy:<map>`
    /// (or `greedy-pv`, using `ntk-ef`), `committee-e` and `committee-f`.
    pub fn parse(spec: &str, subset: ParamSubset, weights: JointWeights) -> Result<Self> {
        let s = spec.trim().to_ascii_lowercase();
        let map = |name: &str| FeatureMap::parse(name, subset, weights);
        match s.as_str() {
            "random" => Ok(Self::Random),
            "greedy-pv" => Ok(Self::GreedyPv(map("ntk-ef")?)),
            "committee-e" => Ok(Self::Committee(CommitteeMode::Energy)),
            "committee-f" => Ok(Self::Committee(CommitteeMode::Force)),
            _ => {
                if let Some(rest) = s.strip_prefix("lcmd:") {
                    Ok(Self::Lcmd(map(rest)?))
                } else if let Some(rest) = s.strip_prefix("greedy:") {
                    Ok(Self::GreedyPv(map(rest)?))
                } else {
                    map(&s).map(Self::Lcmd).map_err(|_| Error::UnknownName { kind: "method", name: spec.to_string() })
                }
            }
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Random => write!(f, "random"),
            Self::Lcmd(m) => write!(f, "{}", m.name()),
            Self::GreedyPv(m) => write!(f, "greedy:{}", m.name()),
            Self::Committee(CommitteeMode::Energy) => write!(f, "committee-e"),
            Self::Committee(CommitteeMode::Force) => write!(f, "committee-f"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlConfig {
    pub rounds: usize,
    pub batch: usize,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub committee_size: usize,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            batch: 20,
            pipeline: PipelineConfig::default(),
            train: TrainConfig::default(),
            committee_size: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub n_train: usize,
    pub n_pool: usize,
    /// Benchmark structure indices added in this round.
    pub selected: Vec<usize>,
    pub metrics: Metrics,
    pub wall_seconds: f64,
    pub scratch_bytes: usize,
}

fn fit(bench: &Benchmark, train: &[usize], cfg: &AlConfig, seed: RootSeed, member: u64) -> Result<ModelParams> {
    let data = bench.labels(train);
    let mut rng = seed.substream("shuffle", member);
    Ok(potential::train(&bench.pretrained, &bench.spec.descriptor, &data, &cfg.train, &mut rng)?.0)
}

fn evaluate(bench: &Benchmark, model: &ModelParams) -> Result<Metrics> {
    let labels = bench.labels(&bench.test);
    let preds = labels
        .iter()
        .map(|l| potential::energy_and_forces(model, &bench.spec.descriptor, &l.structure))
        .collect::<Result<Vec<_>>>()?;
    compute_metrics(&preds, &labels)
}

fn features(bench: &Benchmark, model: &ModelParams, map: &FeatureMap, idx: &[usize]) -> Result<Vec<f64>> {
    let structures: Vec<&Structure> = idx.iter().map(|&i| &bench.structures[i].label.structure).collect();
    map.compute_all(model, &bench.spec.descriptor, &structures)
}

#[allow(clippy::too_many_arguments)]
fn select(
    bench: &Benchmark,
    method: &Method,
    cfg: &AlConfig,
    model: &ModelParams,
    train: &[usize],
    pool: &[usize],
    batch: usize,
    seed: RootSeed,
    round: usize,
) -> Result<(SelectionResult, usize)> {
    match method {
        Method::Random => Ok((random_select(pool.len(), batch, &mut seed.substream("selection", round as u64))?, 0)),
        Method::Lcmd(map) | Method::GreedyPv(map) => {
            let d = map.dim(model);
            let t = features(bench, model, map, train)?;
            let p = features(bench, model, map, pool)?;
            let (rule, pipeline) = match method {
                Method::Lcmd(_) => (BatchRule::Lcmd, cfg.pipeline),
                _ => (BatchRule::Greedy, PipelineConfig { shortlist: batch, ..cfg.pipeline }),
            };
            let pipeline = PipelineConfig { shortlist: pipeline.shortlist.max(batch), ..pipeline };
            let meter = ScratchMeter::new();
            let (sel, stats) = acquire(
                &mut SliceSource::new(&t, d)?,
                &mut SliceSource::new(&p, d)?,
                rule,
                batch,
                &pipeline,
                &meter,
            )?;
            Ok((sel, stats.scratch_peak_bytes))
        }
        Method::Committee(mode) => {
            if cfg.committee_size < 2 {
                return Err(Error::invalid("committee needs at least 2 members"));
            }
            let mut members = vec![model.clone()];
            for m in 1..cfg.committee_size {
                members.push(fit(bench, train, cfg, seed, m as u64)?);
            }
            let preds = members
                .iter()
                .map(|params| {
                    pool.iter()
                        .map(|&i| {
                            let (energy, forces) = potential::energy_and_forces(
                                params,
                                &bench.spec.descriptor,
                                &bench.structures[i].label.structure,
                            )?;
                            Ok(Prediction { energy, forces })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let scores = committee_scores(&preds)?;
            Ok((greedy_pv_select(scores.by(*mode), batch)?, 0))
        }
    }
}

/// Runs `cfg.rounds` acquisition rounds and returns `rounds + 1` logs.
pub fn al_loop(bench: &Benchmark, method: &Method, cfg: &AlConfig, seed: RootSeed) -> Result<Vec<RoundLog>> {
    let start = Instant::now();
    let mut train = bench.initial.clone();
    let mut pool = bench.pool.clone();
    let mut model = fit(bench, &train, cfg, seed, 0)?;
    let mut logs = vec![RoundLog {
        round: 0,
        n_train: train.len(),
        n_pool: pool.len(),
        selected: Vec::new(),
        metrics: evaluate(bench, &model)?,
        wall_seconds: start.elapsed().as_secs_f64(),
        scratch_bytes: 0,
    }];
    for round in 1..=cfg.rounds {
        let t0 = Instant::now();
        if cfg.batch > 0 && pool.len() < cfg.batch {
            warn!("pool exhausted after {} rounds ({} left, batch {})", round - 1, pool.len(), cfg.batch);
            break;
        }
        let (selected, scratch) = if cfg.batch == 0 {
            (Vec::new(), 0)
        } else {
            let (sel, scratch) = select(bench, method, cfg, &model, &train, &pool, cfg.batch, seed, round)?;
            let mut taken = vec![false; pool.len()];
            let chosen: Vec<usize> = sel.indices().into_iter().map(|p| {
                taken[p] = true;
                pool[p]
            }).collect();
            let mut k = 0;
            pool.retain(|_| {
                k += 1;
                !taken[k - 1]
            });
            (chosen, scratch)
        };
        train.extend(&selected);
        model = fit(bench, &train, cfg, seed, 0)?;
        logs.push(RoundLog {
            round,
            n_train: train.len(),
            n_pool: pool.len(),
            selected,
            metrics: evaluate(bench, &model)?,
            wall_seconds: t0.elapsed().as_secs_f64(),
            scratch_bytes: scratch,
        });
    }
    Ok(logs)
}

/// Sum of a metric over the acquisition rounds (round 0 excluded).
pub fn run_auc(logs: &[RoundLog], metric: &str) -> Result<f64> {
    let values = logs
        .iter()
        .filter(|l| l.round > 0)
        .map(|l| l.metrics.get(metric).ok_or_else(|| Error::UnknownName { kind: "metric", name: metric.to_string() }))
        .collect::<Result<Vec<_>>>()?;
    Ok(auc(&values))
}

/// Fraction of all selected structures that belong to `family`.
pub fn family_fraction(bench: &Benchmark, logs: &[RoundLog], family: usize) -> f64 {
    let all: Vec<usize> = logs.iter().flat_map(|l| l.selected.iter().copied()).collect();
    if all.is_empty() {
        return 0.0;
    }
    all.iter().filter(|&&i| bench.structures[i].family == family).count() as f64 / all.len() as f64
}

pub const ROUND_CSV_HEADER: &str = "seed,round,n_train,metric,value";

/// Long-format rows: one per round and metric, plus pool size, wall time and
/// scratch bytes.
pub fn write_round_csv<W: Write>(mut w: W, seed: u64, logs: &[RoundLog]) -> Result<()> {
    for l in logs {
        for (name, v) in Metrics::NAMES.iter().zip(l.metrics.values()) {
            writeln!(w, "{seed},{},{},{name},{v:e}", l.round, l.n_train)?;
        }
        writeln!(w, "{seed},{},{},n_pool,{}", l.round, l.n_train, l.n_pool)?;
        writeln!(w, "{seed},{},{},wall_seconds,{:.6}", l.round, l.n_train, l.wall_seconds)?;
        writeln!(w, "{seed},{},{},scratch_bytes,{}", l.round, l.n_train, l.scratch_bytes)?;
    }
    Ok(())
}

/// `round,rank,candidate_index,score,cluster_mass` with benchmark structure
/// indices; scores are not kept in the logs and are left empty.
pub fn write_selection_csv<W: Write>(mut w: W, logs: &[RoundLog]) -> Result<()> {
    for l in logs {
        for (rank, i) in l.selected.iter().enumerate() {
            writeln!(w, "{},{rank},{i},,", l.round)?;
        }
    }
    Ok(())
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::benchmark::tests::tiny_spec;

    fn quick(batch: usize) -> AlConfig {
        let pipeline = PipelineConfig { shortlist: 10, chunk: 8, ..PipelineConfig::default() };
        AlConfig { rounds: 3, batch, pipeline, ..AlConfig::default() }
    }

    #[test]
    fn bookkeeping_holds_every_round() {
        let bench = Benchmark::build(&tiny_spec(), RootSeed(1)).unwrap();
        let w = JointWeights::default();
        for name in ["random", "ntk-ef", "greedy:ntk-e", "activation", "committee-f"] {
            let method = Method::parse(name, ParamSubset::All, w).unwrap();
            let logs = al_loop(&bench, &method, &quick(4), RootSeed(7)).unwrap();
            assert_eq!(logs.len(), 4);
            let mut seen: Vec<usize> = bench.initial.clone();
            for (t, l) in logs.iter().enumerate() {
                assert_eq!(l.n_train, 5 + 4 * t);
                assert_eq!(l.n_pool, 30 - 4 * t);
                seen.extend(&l.selected);
            }
            let n = seen.len();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), n, "{name}: duplicate selections");
            assert!(seen.iter().all(|i| !bench.test.contains(i)));
            assert!(logs.iter().flat_map(|l| &l.selected).all(|i| bench.pool.contains(i)));
        }
    }

    #[test]
    fn zero_batch_keeps_metrics_constant() {
        let bench = Benchmark::build(&tiny_spec(), RootSeed(2)).unwrap();
        let logs = al_loop(&bench, &Method::Random, &quick(0), RootSeed(3)).unwrap();
        assert!(logs.windows(2).all(|w| w[0].metrics == w[1].metrics));
    }

    #[test]
    fn runs_are_reproducible() {
        let bench = Benchmark::build(&tiny_spec(), RootSeed(4)).unwrap();
        let m = Method::parse("ntk-e", ParamSubset::All, JointWeights::default()).unwrap();
        let a = al_loop(&bench, &m, &quick(3), RootSeed(5)).unwrap();
        let b = al_loop(&bench, &m, &quick(3), RootSeed(5)).unwrap();
        let strip = |v: &[RoundLog]| v.iter().map(|l| (l.selected.clone(), l.metrics)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn exhausted_pool_truncates() {
        let bench = Benchmark::build(&tiny_spec(), RootSeed(6)).unwrap();
        let cfg = AlConfig { rounds: 10, batch: 12, ..quick(12) };
        let cfg = AlConfig { pipeline: PipelineConfig { shortlist: 12, ..cfg.pipeline }, ..cfg };
        let logs = al_loop(&bench, &Method::Random, &cfg, RootSeed(1)).unwrap();
        assert_eq!(logs.len(), 3);
    }

    #[test]
    fn method_names_round_trip() {
        let w = JointWeights::default();
        for name in ["random", "ntk-e", "ntk-f", "ntk-ef", "activation", "greedy:ntk-ef", "committee-e", "committee-f"] {
            assert_eq!(Method::parse(name, ParamSubset::All, w).unwrap().to_string(), name);
        }
        assert!(Method::parse("bogus", ParamSubset::All, w).is_err());
    }
}
