//! Surrogate energy model.
//!
//! Per-atom descriptor
//! `d_i[k] = Σ_{j≠i, r_ij<r_c} exp(-(r_ij-μ_k)²/(2σ²)) · f_cut(r_ij)` with
//! `f_cut(r) = ½(cos(πr/r_c)+1)`, concatenated with the species embedding
//! row, fed through one tanh layer and a linear readout:
//! `e_i = w2·tanh(W1 [d_i; emb(z_i)] + b1) + b2`, `E = Σ_i e_i`.
//!
//! Everything here is analytic except [`mixed_jacobian`], which takes central
//! differences of the analytic parameter gradient over coordinates.

use std::f64::consts::PI;

use super::params::{DescriptorConfig, ModelParams, ParamSubset};
use super::structure::{Structure, Vec3};
use crate::error::{Error, Result};

struct Pair {
    i: usize,
    j: usize,
    /// (r_i - r_j) / |r_i - r_j|
    unit: Vec3,
    dphi: Vec<f64>,
}

/// Intermediate values of one forward pass.
struct Forward {
    n_atoms: usize,
    n_radial: usize,
    hidden: usize,
    input_dim: usize,
    species: Vec<usize>,
    /// `n_atoms × input_dim`
    inputs: Vec<f64>,
    pairs: Vec<Pair>,
    /// tanh activations, `n_atoms × hidden`
    act: Vec<f64>,
    energy: f64,
}

impl Forward {
    fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    fn act(&self, i: usize) -> &[f64] {
        &self.act[i * self.hidden..(i + 1) * self.hidden]
    }
}

fn cutoff_fn(r: f64, rc: f64) -> (f64, f64) {
    if r >= rc {
        (0.0, 0.0)
    } else {
        let a = PI * r / rc;
        (0.5 * (a.cos() + 1.0), -0.5 * PI / rc * a.sin())
    }
}

fn check_inputs(params: &ModelParams, cfg: &DescriptorConfig, x: &Structure) -> Result<()> {
    if x.n_atoms() == 0 {
        return Err(Error::EmptyStructure);
    }
    cfg.validate()?;
    let d = params.dims;
    if cfg.n_radial() != d.n_radial {
        return Err(Error::shape(format!(
            "descriptor has {} radial centres but the model expects {}",
            cfg.n_radial(),
            d.n_radial
        )));
    }
    if params.w1.len() != d.hidden * d.input_dim()
        || params.embedding.len() != d.n_species * d.emb_dim
        || params.b1.len() != d.hidden
        || params.w2.len() != d.hidden
    {
        return Err(Error::shape("parameter blocks disagree with model dims"));
    }
    if let Some(&z) = x.species().iter().find(|&&z| z >= d.n_species) {
        return Err(Error::shape(format!(
            "species index {z} out of range for {} species",
            d.n_species
        )));
    }
    Ok(())
}

fn forward(params: &ModelParams, cfg: &DescriptorConfig, x: &Structure) -> Result<Forward> {
    check_inputs(params, cfg, x)?;
    let dims = params.dims;
    let (n, k_rad, h, m) = (x.n_atoms(), dims.n_radial, dims.hidden, dims.input_dim());
    let pos = x.positions();
    let inv_two_var = 1.0 / (2.0 * cfg.width * cfg.width);
    let inv_var = 1.0 / (cfg.width * cfg.width);

    let mut inputs = vec![0.0; n * m];
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1], pos[i][2] - pos[j][2]];
            let r = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
            if r >= cfg.cutoff {
                continue;
            }
            let (fc, dfc) = cutoff_fn(r, cfg.cutoff);
            let mut phi = Vec::with_capacity(k_rad);
            let mut dphi = Vec::with_capacity(k_rad);
            for &mu in &cfg.centers {
                let g = (-(r - mu) * (r - mu) * inv_two_var).exp();
                phi.push(g * fc);
                dphi.push(g * (dfc - (r - mu) * inv_var * fc));
            }
            for k in 0..k_rad {
                inputs[i * m + k] += phi[k];
                inputs[j * m + k] += phi[k];
            }
            let unit = [diff[0] / r, diff[1] / r, diff[2] / r];
            pairs.push(Pair { i, j, unit, dphi });
        }
    }
    for (i, &z) in x.species().iter().enumerate() {
        let row = &params.embedding[z * dims.emb_dim..(z + 1) * dims.emb_dim];
        inputs[i * m + k_rad..(i + 1) * m].copy_from_slice(row);
    }

    let mut act = vec![0.0; n * h];
    let mut energy = 0.0;
    for i in 0..n {
        let u = &inputs[i * m..(i + 1) * m];
        let mut e_i = params.b2;
        for hh in 0..h {
            let w = &params.w1[hh * m..(hh + 1) * m];
            let a = params.b1[hh] + dot(w, u);
            let t = a.tanh();
            act[i * h + hh] = t;
            e_i += params.w2[hh] * t;
        }
        energy += e_i;
    }
    Ok(Forward {
        n_atoms: n,
        n_radial: k_rad,
        hidden: h,
        input_dim: m,
        species: x.species().to_vec(),
        inputs,
        pairs,
        act,
        energy,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Total energy in eV.
pub fn energy(params: &ModelParams, cfg: &DescriptorConfig, x: &Structure) -> Result<f64> {
    Ok(forward(params, cfg, x)?.energy)
}

/// `∂E/∂d_i` restricted to the descriptor columns, `n_atoms × n_radial`.
fn descriptor_sensitivity(params: &ModelParams, fw: &Forward) -> Vec<f64> {
    let (k_rad, h, m) = (fw.n_radial, fw.hidden, fw.input_dim);
    let mut g = vec![0.0; fw.n_atoms * k_rad];
    for i in 0..fw.n_atoms {
        let t = fw.act(i);
        for hh in 0..h {
            let beta = params.w2[hh] * (1.0 - t[hh] * t[hh]);
            let w = &params.w1[hh * m..hh * m + k_rad];
            for k in 0..k_rad {
                g[i * k_rad + k] += beta * w[k];
            }
        }
    }
    g
}

fn forces_from(params: &ModelParams, fw: &Forward) -> Vec<Vec3> {
    let k_rad = fw.n_radial;
    let g = descriptor_sensitivity(params, fw);
    let mut f = vec![[0.0; 3]; fw.n_atoms];
    for p in &fw.pairs {
        let gi = &g[p.i * k_rad..(p.i + 1) * k_rad];
        let gj = &g[p.j * k_rad..(p.j + 1) * k_rad];
        let mut c = 0.0;
        for k in 0..k_rad {
            c += (gi[k] + gj[k]) * p.dphi[k];
        }
        for a in 0..3 {
            let push = c * p.unit[a];
            f[p.i][a] -= push;
            f[p.j][a] += push;
        }
    }
    f
}

/// Forces `F_i = -∇_{r_i} E` in eV/Å.
pub fn forces(params: &ModelParams, cfg: &DescriptorConfig, x: &Structure) -> Result<Vec<Vec3>> {
    let fw = forward(params, cfg, x)?;
    Ok(forces_from(params, &fw))
}

/// Energy and forces from one forward pass.
pub fn energy_and_forces(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    x: &Structure,
) -> Result<(f64, Vec<Vec3>)> {
    let fw = forward(params, cfg, x)?;
    let f = forces_from(params, &fw);
    Ok((fw.energy, f))
}

/// Sum of per-atom hidden activations; shared by the readout gradient and
/// [`activation_feature`] so that the two agree bitwise.
fn pooled_activation(fw: &Forward) -> Vec<f64> {
    let mut pooled = vec![0.0; fw.hidden];
    for i in 0..fw.n_atoms {
        for (acc, t) in pooled.iter_mut().zip(fw.act(i)) {
            *acc += t;
        }
    }
    pooled
}

/// Backpropagates per-(atom, hidden unit) coefficients into the `b1`, `w1`
/// and embedding blocks of `out`.
///
/// `hidden_coef[i*h + hh]` is summed into `b1`, multiplies the input row `u_i`
/// for `w1`, and flows through the embedding columns of `w1`. `extra` adds
/// `Σ_i coef_ih · δd_i` to the descriptor columns of `w1`.
fn hidden_and_embedding_grads(
    params: &ModelParams,
    fw: &Forward,
    hidden_coef: &[f64],
    extra: Option<(&[f64], &[f64])>,
    out: &mut [f64],
) {
    let dims = params.dims;
    let (h, m, k_rad) = (fw.hidden, fw.input_dim, fw.n_radial);
    let emb_len = dims.n_species * dims.emb_dim;
    let w1_off = emb_len;
    let b1_off = w1_off + h * m;
    for i in 0..fw.n_atoms {
        let u = fw.input(i);
        let z = fw.species[i];
        for hh in 0..h {
            let c = hidden_coef[i * h + hh];
            out[b1_off + hh] += c;
            let row = &mut out[w1_off + hh * m..w1_off + (hh + 1) * m];
            for (r, uc) in row.iter_mut().zip(u) {
                *r += c * uc;
            }
            let w_emb = &params.w1[hh * m + k_rad..(hh + 1) * m];
            let emb = &mut out[z * dims.emb_dim..(z + 1) * dims.emb_dim];
            for (e, w) in emb.iter_mut().zip(w_emb) {
                *e += c * w;
            }
        }
        if let Some((extra_coef, delta_desc)) = extra {
            let du = &delta_desc[i * k_rad..(i + 1) * k_rad];
            for hh in 0..h {
                let c = extra_coef[i * h + hh];
                let row = &mut out[w1_off + hh * m..w1_off + hh * m + k_rad];
                for (r, d) in row.iter_mut().zip(du) {
                    *r += c * d;
                }
            }
        }
    }
}

fn full_energy_gradient(params: &ModelParams, fw: &Forward) -> Vec<f64> {
    let dims = params.dims;
    let h = fw.hidden;
    let mut out = vec![0.0; dims.n_params()];
    let mut beta = vec![0.0; fw.n_atoms * h];
    for i in 0..fw.n_atoms {
        for (hh, t) in fw.act(i).iter().enumerate() {
            beta[i * h + hh] = params.w2[hh] * (1.0 - t * t);
        }
    }
    hidden_and_embedding_grads(params, fw, &beta, None, &mut out);
    let w2_off = dims.n_params() - 1 - h;
    out[w2_off..w2_off + h].copy_from_slice(&pooled_activation(fw));
    out[dims.n_params() - 1] = fw.n_atoms as f64;
    out
}

/// Gradient of the energy with respect to a parameter subset, in the
/// flattened parameter order.
pub fn grad_params_energy(
    params: &ModelParams,
    subset: ParamSubset,
    cfg: &DescriptorConfig,
    x: &Structure,
) -> Result<Vec<f64>> {
    let fw = forward(params, cfg, x)?;
    let full = full_energy_gradient(params, &fw);
    let range = ModelParams::subset_range(params.dims, subset);
    Ok(full[range].to_vec())
}

/// Directional coordinate derivative `D_v E = Σ_{i,α} v_iα ∂E/∂r_iα` and its
/// exact gradient with respect to all parameters.
///
/// Since `F = -∇_r E`, `Σ v·∂F/∂θ = -∂(D_v E)/∂θ`; training uses this to
/// backpropagate the force loss without forming the mixed Jacobian.
pub fn directional_param_gradient(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    x: &Structure,
    direction: &[Vec3],
) -> Result<(f64, Vec<f64>)> {
    let fw = forward(params, cfg, x)?;
    if direction.len() != fw.n_atoms {
        return Err(Error::shape(format!(
            "direction has {} atoms, structure has {}",
            direction.len(),
            fw.n_atoms
        )));
    }
    Ok(directional_from(params, &fw, direction))
}

fn directional_from(params: &ModelParams, fw: &Forward, direction: &[Vec3]) -> (f64, Vec<f64>) {
    let dims = params.dims;
    let (n, h, m, k_rad) = (fw.n_atoms, fw.hidden, fw.input_dim, fw.n_radial);

    let mut delta_desc = vec![0.0; n * k_rad];
    for p in &fw.pairs {
        let (vi, vj) = (direction[p.i], direction[p.j]);
        let dr = p.unit[0] * (vi[0] - vj[0]) + p.unit[1] * (vi[1] - vj[1]) + p.unit[2] * (vi[2] - vj[2]);
        for k in 0..k_rad {
            let v = p.dphi[k] * dr;
            delta_desc[p.i * k_rad + k] += v;
            delta_desc[p.j * k_rad + k] += v;
        }
    }

    // q_i = W1[:, desc] δd_i
    let mut value = 0.0;
    let mut curv = vec![0.0; n * h];
    let mut beta = vec![0.0; n * h];
    let mut w2_grad = vec![0.0; h];
    for i in 0..n {
        let dd = &delta_desc[i * k_rad..(i + 1) * k_rad];
        for (hh, t) in fw.act(i).iter().enumerate() {
            let q = dot(&params.w1[hh * m..hh * m + k_rad], dd);
            let s = 1.0 - t * t;
            value += params.w2[hh] * s * q;
            w2_grad[hh] += s * q;
            curv[i * h + hh] = params.w2[hh] * q * (-2.0 * t * s);
            beta[i * h + hh] = params.w2[hh] * s;
        }
    }

    let mut out = vec![0.0; dims.n_params()];
    hidden_and_embedding_grads(params, fw, &curv, Some((&beta, &delta_desc)), &mut out);
    let w2_off = dims.n_params() - 1 - h;
    out[w2_off..w2_off + h].copy_from_slice(&w2_grad);
    (value, out)
}

/// `J[p, i, α] = ∂F_iα / ∂θ_p` for a parameter subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedJacobian {
    n_params: usize,
    n_atoms: usize,
    /// Parameter-major: `data[(p * n_atoms + i) * 3 + α]`.
    data: Vec<f64>,
}

impl MixedJacobian {
    pub fn from_raw(n_params: usize, n_atoms: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_params * n_atoms * 3 {
            return Err(Error::shape(format!(
                "jacobian data has {} entries, expected {}",
                data.len(),
                n_params * n_atoms * 3
            )));
        }
        Ok(Self { n_params, n_atoms, data })
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn get(&self, p: usize, i: usize, axis: usize) -> f64 {
        self.data[(p * self.n_atoms + i) * 3 + axis]
    }

    /// All `n_atoms × 3` entries for parameter `p`.
    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.n_atoms * 3..(p + 1) * self.n_atoms * 3]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Default coordinate step (Å) for [`mixed_jacobian`].
pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-4;

/// Mixed parameter–coordinate Jacobian by central differences of the
/// analytic parameter gradient.
pub fn mixed_jacobian(
    params: &ModelParams,
    subset: ParamSubset,
    cfg: &DescriptorConfig,
    x: &Structure,
    step: f64,
) -> Result<MixedJacobian> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    check_inputs(params, cfg, x)?;
    let n = x.n_atoms();
    let range = ModelParams::subset_range(params.dims, subset);
    let np = range.len();
    let mut data = vec![0.0; np * n * 3];
    for i in 0..n {
        for axis in 0..3 {
            let plus = grad_params_energy(params, subset, cfg, &x.displaced(i, axis, step))?;
            let minus = grad_params_energy(params, subset, cfg, &x.displaced(i, axis, -step))?;
            for p in 0..np {
                data[(p * n + i) * 3 + axis] = -(plus[p] - minus[p]) / (2.0 * step);
            }
        }
    }
    Ok(MixedJacobian { n_params: np, n_atoms: n, data })
}

/// Mixed Jacobian from the exact directional second derivative, one unit
/// direction per coordinate. Used to cross-check [`mixed_jacobian`].
pub fn mixed_jacobian_exact(
    params: &ModelParams,
    subset: ParamSubset,
    cfg: &DescriptorConfig,
    x: &Structure,
) -> Result<MixedJacobian> {
    let fw = forward(params, cfg, x)?;
    let n = fw.n_atoms;
    let range = ModelParams::subset_range(params.dims, subset);
    let np = range.len();
    let mut data = vec![0.0; np * n * 3];
    let mut dir = vec![[0.0; 3]; n];
    for i in 0..n {
        for axis in 0..3 {
            dir[i][axis] = 1.0;
            let (_, g) = directional_from(params, &fw, &dir);
            dir[i][axis] = 0.0;
            for (p, gp) in g[range.clone()].iter().enumerate() {
                data[(p * n + i) * 3 + axis] = -gp;
            }
        }
    }
    Ok(MixedJacobian { n_params: np, n_atoms: n, data })
}

/// Energy, forces, and `a·∇_θE + Σ_{i,α} c_iα ∇_θF_iα` where `(a, c)` is
/// chosen by `weights` after seeing the prediction.
pub(crate) fn weighted_gradient<W>(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    x: &Structure,
    weights: W,
) -> Result<(f64, Vec<Vec3>, Vec<f64>)>
where
    W: FnOnce(f64, &[Vec3]) -> (f64, Vec<Vec3>),
{
    let fw = forward(params, cfg, x)?;
    let f = forces_from(params, &fw);
    let (energy_coef, force_coef) = weights(fw.energy, &f);
    let mut grad = vec![0.0; params.dims.n_params()];
    if energy_coef != 0.0 {
        for (g, e) in grad.iter_mut().zip(full_energy_gradient(params, &fw)) {
            *g += energy_coef * e;
        }
    }
    if force_coef.iter().flatten().any(|&c| c != 0.0) {
        let (_, dg) = directional_from(params, &fw, &force_coef);
        for (g, d) in grad.iter_mut().zip(dg) {
            *g -= d;
        }
    }
    Ok((fw.energy, f, grad))
}

/// Pooled hidden activations `Σ_i tanh(W1 [d_i; emb(z_i)] + b1)`.
pub fn activation_feature(
    params: &ModelParams,
    cfg: &DescriptorConfig,
    x: &Structure,
) -> Result<Vec<f64>> {
    let fw = forward(params, cfg, x)?;
    Ok(pooled_activation(&fw))
}
