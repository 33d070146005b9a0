//! Python bindings: the surrogate model and its feature maps, the chunked
//! acquisition pipeline, and the synthetic active-learning benchmark.

use std::fs::File;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use poolforge::acquisition::{self, BatchRule, PipelineConfig, Prediction, ScratchMeter, SliceSource};
use poolforge::harness::{al_loop, run_auc, AlConfig, Benchmark, BenchmarkSpec, Method, Metrics};
use poolforge::kernels::{self, BitVector, FeatureMap, JointWeights};
use poolforge::potential::{self, DescriptorConfig, ModelDims, ModelParams, ParamSubset, Structure, Vec3};
use poolforge::rng::RootSeed;
use poolforge::Error;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn flatten(rows: &[Vec<f64>]) -> PyResult<(Vec<f64>, usize)> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok((rows.concat(), dim))
}

fn structure(species: Vec<usize>, positions: Vec<[f64; 3]>) -> PyResult<Structure> {
    Structure::new(species, positions).map_err(to_py)
}

/// The surrogate potential with its descriptor settings.
#[pyclass(name = "Model", module = "poolforge_py")]
struct PyModel {
    params: ModelParams,
    descriptor: DescriptorConfig,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (n_species=4, emb_dim=4, hidden=16, n_radial=8, cutoff=5.0, rbf_width=0.5, seed=0))]
    fn new(
        n_species: usize,
        emb_dim: usize,
        hidden: usize,
        n_radial: usize,
        cutoff: f64,
        rbf_width: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let descriptor = DescriptorConfig::equally_spaced(cutoff, n_radial, rbf_width).map_err(to_py)?;
        let dims = ModelDims { n_species, emb_dim, n_radial, hidden };
        let params = ModelParams::init(dims, &mut RootSeed(seed).stream("student"));
        Ok(Self { params, descriptor })
    }

    /// Loads parameters from a `PFPM` file; the descriptor uses the default
    /// cutoff and width with the file's radial count.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let params = ModelParams::read_pfpm(File::open(path)?).map_err(to_py)?;
        let d = DescriptorConfig::default();
        let descriptor = DescriptorConfig::equally_spaced(d.cutoff, params.dims.n_radial, d.width).map_err(to_py)?;
        Ok(Self { params, descriptor })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.params.write_pfpm(File::create(path)?).map_err(to_py)
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.params.n_params()
    }

    fn parameters(&self) -> Vec<f64> {
        self.params.flatten()
    }

    fn energy(&self, species: Vec<usize>, positions: Vec<[f64; 3]>) -> PyResult<f64> {
        potential::energy(&self.params, &self.descriptor, &structure(species, positions)?).map_err(to_py)
    }

    fn forces(&self, species: Vec<usize>, positions: Vec<[f64; 3]>) -> PyResult<Vec<Vec3>> {
        potential::forces(&self.params, &self.descriptor, &structure(species, positions)?).map_err(to_py)
    }

    /// Cosine-normalised feature vector: `ntk-e`, `ntk-f`, `ntk-ef` or
    /// `activation`.
    #[pyo3(signature = (map, species, positions, subset="all", weight_energy=1.0, weight_force=1.0))]
    fn features(
        &self,
        map: &str,
        species: Vec<usize>,
        positions: Vec<[f64; 3]>,
        subset: &str,
        weight_energy: f64,
        weight_force: f64,
    ) -> PyResult<Vec<f64>> {
        let subset: ParamSubset = subset.parse().map_err(to_py)?;
        let weights = JointWeights::new(weight_energy, weight_force).map_err(to_py)?;
        let map = FeatureMap::parse(map, subset, weights).map_err(to_py)?;
        map.compute(&self.params, &self.descriptor, &structure(species, positions)?).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let d = self.params.dims;
        format!("Model(n_species={}, emb_dim={}, hidden={}, n_radial={})", d.n_species, d.emb_dim, d.hidden, d.n_radial)
    }
}

/// `λ·φᵀ(ΦᵀΦ + λI)⁻¹φ` for every pool row.
#[pyfunction]
#[pyo3(signature = (train, pool, ridge=acquisition::DEFAULT_RIDGE))]
fn pv_scores(train: Vec<Vec<f64>>, pool: Vec<Vec<f64>>, ridge: f64) -> PyResult<Vec<f64>> {
    let (pool, dim) = flatten(&pool)?;
    let (train, train_dim) = flatten(&train)?;
    if !train.is_empty() && train_dim != dim {
        return Err(to_py(Error::DimMismatch { expected: dim, got: train_dim }));
    }
    let mut state = acquisition::PrecisionState::new(dim);
    state.accumulate(&train).map_err(to_py)?;
    state.finalize(ridge).map_err(to_py)?;
    let mut scores = vec![0.0; pool.len() / dim.max(1)];
    state.score_chunk(&pool, &mut scores).map_err(to_py)?;
    Ok(scores.into_iter().map(|s| ridge * s).collect())
}

/// One chunked acquisition round; returns `(pool_index, score)` pairs in
/// selection order.
#[pyfunction]
#[pyo3(signature = (train, pool, batch, rule="lcmd", shortlist=500, chunk=512, ridge=acquisition::DEFAULT_RIDGE))]
fn acquire(
    train: Vec<Vec<f64>>,
    pool: Vec<Vec<f64>>,
    batch: usize,
    rule: &str,
    shortlist: usize,
    chunk: usize,
    ridge: f64,
) -> PyResult<Vec<(usize, f64)>> {
    let rule = match rule {
        "lcmd" => BatchRule::Lcmd,
        "greedy" => BatchRule::Greedy,
        _ => return Err(PyValueError::new_err(format!("unknown rule '{rule}'"))),
    };
    let (p, dim) = flatten(&pool)?;
    let (t, _) = flatten(&train)?;
    let mut train_src = SliceSource::new(&t, dim).map_err(to_py)?;
    let mut pool_src = SliceSource::new(&p, dim).map_err(to_py)?;
    let cfg = PipelineConfig { ridge, shortlist, chunk, parallel: false };
    let meter = ScratchMeter::new();
    let (sel, _) = acquisition::acquire(&mut train_src, &mut pool_src, rule, batch, &cfg, &meter).map_err(to_py)?;
    Ok(sel.picks.iter().map(|p| (p.index, p.score)).collect())
}

/// LCMD over explicit candidates and centres; returns candidate rows.
#[pyfunction]
fn lcmd_select(candidates: Vec<Vec<f64>>, centres: Vec<Vec<f64>>, batch: usize) -> PyResult<Vec<usize>> {
    let (c, dim) = flatten(&candidates)?;
    let (z, _) = flatten(&centres)?;
    let picks = acquisition::lcmd_select(&c, &z, dim, batch).map_err(to_py)?;
    Ok(picks.iter().map(|p| p.position).collect())
}

#[pyfunction]
fn top_k(scores: Vec<f64>, k: usize) -> PyResult<Vec<(usize, f64)>> {
    let entries = acquisition::top_k(&scores, k).map_err(to_py)?;
    Ok(entries.iter().map(|e| (e.index, e.score)).collect())
}

#[pyfunction]
fn tanimoto(width: usize, a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    let a = BitVector::from_indices(width, &a).map_err(to_py)?;
    let b = BitVector::from_indices(width, &b).map_err(to_py)?;
    kernels::tanimoto(&a, &b).map_err(to_py)
}

/// Energy and force disagreement per candidate. `members[m][c]` is member
/// `m`'s `(energy, forces)` for candidate `c`.
#[pyfunction]
fn committee_scores(members: Vec<Vec<(f64, Vec<Vec3>)>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let members: Vec<Vec<Prediction>> = members
        .into_iter()
        .map(|m| m.into_iter().map(|(energy, forces)| Prediction { energy, forces }).collect())
        .collect();
    let s = acquisition::committee_scores(&members).map_err(to_py)?;
    Ok((s.energy, s.force))
}

/// One active-learning run on the default synthetic benchmark. Returns a
/// list of per-round dicts.
#[pyfunction]
#[pyo3(signature = (method="ntk-ef", seed=0, rounds=10, batch=20))]
fn al_run<'py>(py: Python<'py>, method: &str, seed: u64, rounds: usize, batch: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let method = Method::parse(method, ParamSubset::All, JointWeights::default()).map_err(to_py)?;
    let bench = Benchmark::build(&BenchmarkSpec::default(), RootSeed(seed)).map_err(to_py)?;
    let cfg = AlConfig { rounds, batch, ..AlConfig::default() };
    let logs = al_loop(&bench, &method, &cfg, RootSeed(seed)).map_err(to_py)?;
    let auc = run_auc(&logs, "force_rmse").map_err(to_py)?;
    let mut out = Vec::with_capacity(logs.len());
    for l in &logs {
        let d = PyDict::new(py);
        d.set_item("round", l.round)?;
        d.set_item("n_train", l.n_train)?;
        d.set_item("n_pool", l.n_pool)?;
        d.set_item("selected", l.selected.clone())?;
        for (name, v) in Metrics::NAMES.iter().zip(l.metrics.values()) {
            d.set_item(*name, v)?;
        }
        d.set_item("force_rmse_auc", auc)?;
        out.push(d);
    }
    Ok(out)
}

#[pymodule]
fn poolforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(pv_scores, m)?)?;
    m.add_function(wrap_pyfunction!(acquire, m)?)?;
    m.add_function(wrap_pyfunction!(lcmd_select, m)?)?;
    m.add_function(wrap_pyfunction!(top_k, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(committee_scores, m)?)?;
    m.add_function(wrap_pyfunction!(al_run, m)?)?;
    m.add("DEFAULT_RIDGE", acquisition::DEFAULT_RIDGE)?;
    Ok(())
}
