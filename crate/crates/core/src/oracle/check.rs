//! Randomised sweeps comparing the engine against the references. Each sweep
//! returns a report; `oracle-check` and the acceptance suite run them.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{dense_top_k, fd_gradient_check, kernel_pv_all, observed_order, reference_lcmd};
use crate::acquisition::{build_precision, lcmd_select, stream_shortlist, PipelineConfig, ScratchMeter, SliceSource};
use crate::error::Result;
use crate::kernels::force_ntk_feature;
use crate::potential::{
    self, rotation_from_uniform, DescriptorConfig, ModelDims, ModelParams, ParamSubset, Structure,
    DEFAULT_JACOBIAN_STEP,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed error (or the smallest observed order, for
    /// convergence checks).
    pub worst: f64,
    pub tolerance: f64,
    pub failures: Vec<String>,
}

impl SweepReport {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, cases: 0, worst: 0.0, tolerance, failures: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        }
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, worst {:.3e} (tolerance {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )?;
        for msg in &self.failures {
            write!(f, "\n    {msg}")?;
        }
        Ok(())
    }
}

/// Rows of Gaussian entries rescaled to norms drawn from `[0.5, 1.5)`.
fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let target = rng.random_range(0.5..1.5);
        out.extend(row.iter().map(|v| v * target / norm));
    }
    out
}

/// Feature-space `λ·φᵀMφ` against the kernel-space posterior variance.
pub fn woodbury_sweep(seed: u64, ridge: f64) -> Result<SweepReport> {
    let mut rep = SweepReport::new("woodbury equivalence", 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_p = 300;
    for inst in 0..50 {
        let d = [4, 16, 32][inst % 3];
        let n_t = [0, 1, 40, 100][(inst / 3) % 4];
        let chunk = [1, 7, 64, 300][inst % 4];
        let train = random_rows(&mut rng, n_t, d);
        let pool = random_rows(&mut rng, n_p, d);
        let cfg = PipelineConfig { ridge, chunk, ..PipelineConfig::default() };
        let state = build_precision(&mut SliceSource::new(&train, d)?, &cfg, &ScratchMeter::new())?;
        let mut scaled = vec![0.0; n_p];
        for (rows, out) in pool.chunks(chunk * d).zip(scaled.chunks_mut(chunk)) {
            state.score_chunk(rows, out)?;
        }
        scaled.iter_mut().for_each(|s| *s *= ridge);
        let reference = kernel_pv_all(&train, &pool, d, ridge)?;
        for (c, (a, b)) in scaled.iter().zip(&reference).enumerate() {
            let rel = (a - b).abs() / b.abs();
            rep.worst = rep.worst.max(rel);
            if !(rel <= rep.tolerance) {
                rep.fail(format!("instance {inst} (d={d}, n_T={n_t}) candidate {c}: {a:e} vs {b:e}"));
            }
        }
        if dense_top_k(&scaled, n_p) != dense_top_k(&reference, n_p) {
            rep.fail(format!("instance {inst} (d={d}, n_T={n_t}): rankings differ"));
        }
        rep.cases += 1;
    }
    Ok(rep)
}

/// Streamed shortlist against a full sort, for several `K` and chunk sizes,
/// with duplicated rows to force tied scores.
pub fn shortlist_sweep(seed: u64, batch: usize) -> Result<SweepReport> {
    let mut rep = SweepReport::new("shortlist exactness", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, n_t, n_p) = (8, 30, 200);
    let train = random_rows(&mut rng, n_t, d);
    let mut pool = random_rows(&mut rng, n_p, d);
    for _ in 0..40 {
        let (from, to) = (rng.random_range(0..n_p), rng.random_range(0..n_p));
        pool.copy_within(from * d..(from + 1) * d, to * d);
    }
    let flat: Vec<f64> = pool[..d].repeat(n_p);
    for (label, rows) in [("random with duplicates", &pool), ("all equal", &flat)] {
        let base = PipelineConfig { ridge: 1e-4, ..PipelineConfig::default() };
        let state = build_precision(&mut SliceSource::new(&train, d)?, &base, &ScratchMeter::new())?;
        let scores: Vec<f64> = rows.chunks_exact(d).map(|x| state.score(x)).collect::<Result<_>>()?;
        for k in [1, batch, n_p / 2, n_p] {
            let expected = dense_top_k(&scores, k);
            for chunk in [1, 3, 17, n_p] {
                let cfg = PipelineConfig { shortlist: k, chunk, ..base };
                let got = stream_shortlist(&mut SliceSource::new(rows, d)?, &state, &cfg, &ScratchMeter::new())?;
                let idx: Vec<usize> = got.iter().map(|e| e.index).collect();
                if idx != expected {
                    rep.fail(format!("{label}: K={k}, C={chunk}: shortlist differs from full sort"));
                }
                rep.cases += 1;
            }
        }
    }
    Ok(rep)
}

/// Incremental LCMD against the quadratic reference, including degenerate
/// instances with coincident points and tied distances.
pub fn lcmd_sweep(seed: u64) -> Result<SweepReport> {
    let mut rep = SweepReport::new("lcmd oracle equality", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for inst in 0..50 {
        let d = [2, 5, 16][inst % 3];
        let n_c = rng.random_range(1..=20);
        let n_x = rng.random_range(20..=200 - n_c);
        let batch = rng.random_range(1..=20);
        let degenerate = inst % 5 == 0;
        let (centres, mut cands) = if degenerate {
            // small integer grid: many exact ties
            let grid = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
                (0..n * d).map(|_| rng.random_range(-2..=2) as f64).collect()
            };
            (grid(&mut rng, n_c), grid(&mut rng, n_x))
        } else {
            (random_rows(&mut rng, n_c, d), random_rows(&mut rng, n_x, d))
        };
        if degenerate {
            let c = rng.random_range(0..n_c);
            cands[..d].copy_from_slice(&centres[c * d..(c + 1) * d]);
        }
        let got = lcmd_select(&cands, &centres, d, batch)?;
        let want = reference_lcmd(&cands, &centres, d, batch)?;
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(g, w)| {
                g.position == w.position
                    && g.cluster == w.cluster
                    && g.cluster_mass == w.cluster_mass
                    && g.distance == w.distance
            });
        if !same {
            rep.fail(format!("instance {inst} (d={d}, centres={n_c}, candidates={n_x}, B={batch}) differs"));
        }
        let mut seen: Vec<usize> = got.iter().map(|p| p.position).collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != got.len() {
            rep.fail(format!("instance {inst}: duplicate selection"));
        }
        rep.cases += 1;
    }
    Ok(rep)
}

/// Random structure of `n` atoms in a cube sized for roughly liquid density,
/// with all pair distances at least `min_dist`.
pub fn random_structure(rng: &mut ChaCha8Rng, n: usize, n_species: usize, min_dist: f64) -> Structure {
    let side = 1.6 * (n as f64).cbrt() + 0.5;
    loop {
        let species = (0..n).map(|_| rng.random_range(0..n_species)).collect();
        let positions = (0..n)
            .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side)])
            .collect();
        let s = Structure::new(species, positions).expect("finite coordinates");
        if n == 1 || s.min_pair_distance() >= min_dist {
            return s;
        }
    }
}

fn check_model(rng: &mut ChaCha8Rng) -> (ModelParams, DescriptorConfig) {
    let dims = ModelDims { n_species: 3, emb_dim: 4, n_radial: 8, hidden: 16 };
    (ModelParams::init(dims, rng), DescriptorConfig::default())
}

fn flat_positions(s: &Structure) -> Vec<f64> {
    s.positions().iter().flatten().copied().collect()
}

fn with_positions(s: &Structure, flat: &[f64]) -> Structure {
    let pos = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Structure::new(s.species().to_vec(), pos).expect("finite coordinates")
}

/// Forces and parameter gradients against central differences, and the
/// convergence order of the mixed Jacobian.
pub fn derivative_sweep(seed: u64) -> Result<Vec<SweepReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, cfg) = check_model(&mut rng);
    let mut forces = SweepReport::new("forces vs finite differences", 1e-5);
    let mut grads = SweepReport::new("parameter gradient vs finite differences", 1e-5);
    let mut order = SweepReport::new("mixed jacobian convergence order", 1.9);
    order.worst = f64::INFINITY;
    let mut b2 = SweepReport::new("b2 jacobian rows zero", 0.0);
    for case in 0..10 {
        let x = random_structure(&mut rng, 3 + case % 6, 3, 0.9);
        let f = potential::forces(&params, &cfg, &x)?;
        let neg: Vec<f64> = f.iter().flatten().map(|v| -v).collect();
        let err = fd_gradient_check(
            |p| potential::energy(&params, &cfg, &with_positions(&x, p)).expect("valid structure"),
            &neg,
            &flat_positions(&x),
            1e-4,
        )?;
        forces.worst = forces.worst.max(err);
        if !(err < forces.tolerance) {
            forces.fail(format!("structure {case}: {err:e}"));
        }
        forces.cases += 1;

        let g = potential::grad_params_energy(&params, ParamSubset::All, &cfg, &x)?;
        let err = fd_gradient_check(
            |p| {
                let m = ModelParams::from_flat(params.dims, p).expect("same dims");
                potential::energy(&m, &cfg, &x).expect("valid structure")
            },
            &g,
            &params.flatten(),
            1e-5,
        )?;
        grads.worst = grads.worst.max(err);
        if !(err < grads.tolerance) {
            grads.fail(format!("structure {case}: {err:e}"));
        }
        grads.cases += 1;

        let reference = potential::mixed_jacobian(&params, ParamSubset::All, &cfg, &x, 1e-5)?;
        let coarse = potential::mixed_jacobian(&params, ParamSubset::All, &cfg, &x, 1e-3)?;
        let fine = potential::mixed_jacobian(&params, ParamSubset::All, &cfg, &x, 5e-4)?;
        let dev = |j: &potential::MixedJacobian| {
            j.as_slice().iter().zip(reference.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let p = observed_order(dev(&coarse), dev(&fine));
        order.worst = order.worst.min(p);
        if !(p >= order.tolerance) {
            order.fail(format!("structure {case}: observed order {p:.3}"));
        }
        order.cases += 1;

        let default = potential::mixed_jacobian(&params, ParamSubset::All, &cfg, &x, DEFAULT_JACOBIAN_STEP)?;
        let last = default.n_params() - 1;
        let worst_b2 = default.row(last).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        b2.worst = b2.worst.max(worst_b2);
        if worst_b2 != 0.0 {
            b2.fail(format!("structure {case}: b2 row max |J| = {worst_b2:e}"));
        }
        b2.cases += 1;
    }
    Ok(vec![forces, grads, order, b2])
}

/// Net force and rotation invariance of the force NTK feature.
pub fn invariance_sweep(seed: u64, structures: usize) -> Result<Vec<SweepReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (params, cfg) = check_model(&mut rng);
    let mut net = SweepReport::new("net force zero", 1e-10);
    let mut rot = SweepReport::new("force feature rotation invariance", 1e-6);
    for case in 0..structures {
        let x = random_structure(&mut rng, 2 + case % 9, 3, 0.8);
        let f = potential::forces(&params, &cfg, &x)?;
        let total = f.iter().fold([0.0; 3], |s, v| [s[0] + v[0], s[1] + v[1], s[2] + v[2]]);
        let mag = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        net.worst = net.worst.max(mag);
        if !(mag < net.tolerance) {
            net.fail(format!("structure {case}: |ΣF| = {mag:e}"));
        }
        net.cases += 1;

        let r = rotation_from_uniform([rng.random(), rng.random(), rng.random()]);
        let phi = force_ntk_feature(&potential::mixed_jacobian(&params, ParamSubset::All, &cfg, &x, DEFAULT_JACOBIAN_STEP)?)?;
        let phi_r = force_ntk_feature(&potential::mixed_jacobian(
            &params,
            ParamSubset::All,
            &cfg,
            &x.rotated(&r),
            DEFAULT_JACOBIAN_STEP,
        )?)?;
        let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = phi.iter().zip(&phi_r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let rel = diff / norm;
        rot.worst = rot.worst.max(rel);
        if !(rel < rot.tolerance) {
            rot.fail(format!("structure {case}: relative change {rel:e}"));
        }
        rot.cases += 1;
    }
    Ok(vec![net, rot])
}
