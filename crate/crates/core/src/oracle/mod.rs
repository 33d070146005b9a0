//! Brute-force references for the acquisition engine and the potential's
//! derivatives. Nothing here is shared with the code paths it checks: kernel
//! variances go through an explicit `n × n` kernel and a double-double
//! Gaussian elimination, LCMD recomputes every assignment from a full
//! distance matrix, and top-K is a full sort.

mod dd;
pub mod check;

use crate::error::{Error, Result};
pub use dd::Dd;

/// Symmetric matrix of kernel values between feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseKernel {
    pub n: usize,
    pub values: Vec<f64>,
    /// Name of the feature map the rows came from.
    pub feature_map: String,
}

impl DenseKernel {
    /// Linear kernel over the rows of `features`.
    pub fn linear(features: &[f64], dim: usize, feature_map: &str) -> Result<Self> {
        if dim == 0 || !features.len().is_multiple_of(dim) {
            return Err(Error::shape(format!("{} values do not form rows of dim {dim}", features.len())));
        }
        let n = features.len() / dim;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..dim {
                    s += features[i * dim + k] * features[j * dim + k];
                }
                values[i * n + j] = s;
                values[j * n + i] = s;
            }
        }
        Ok(Self { n, values, feature_map: feature_map.to_string() })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// LU factors of `K_TT + λI` with partial pivoting, in double-double.
#[derive(Debug, Clone)]
pub struct KernelPosterior {
    n: usize,
    lu: Vec<Dd>,
    perm: Vec<usize>,
}

impl KernelPosterior {
    pub fn new(k_tt: &DenseKernel, ridge: f64) -> Result<Self> {
        let n = k_tt.n;
        let mut lu: Vec<Dd> = k_tt.values.iter().map(|&v| Dd::from(v)).collect();
        for i in 0..n {
            lu[i * n + i] = lu[i * n + i] + Dd::from(ridge);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| lu[a * n + col].abs().hi.total_cmp(&lu[b * n + col].abs().hi))
                .expect("non-empty range");
            if lu[pivot * n + col].hi == 0.0 || !lu[pivot * n + col].hi.is_finite() {
                return Err(Error::Factorization(format!("singular kernel system at column {col}")));
            }
            if pivot != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot * n + k);
                }
                perm.swap(col, pivot);
            }
            let p = lu[col * n + col];
            for r in col + 1..n {
                let f = lu[r * n + col] / p;
                lu[r * n + col] = f;
                for k in col + 1..n {
                    lu[r * n + k] = lu[r * n + k] - f * lu[col * n + k];
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<Dd> {
        let n = self.n;
        let mut y: Vec<Dd> = self.perm.iter().map(|&p| Dd::from(b[p])).collect();
        for r in 0..n {
            for k in 0..r {
                y[r] = y[r] - self.lu[r * n + k] * y[k];
            }
        }
        for r in (0..n).rev() {
            for k in r + 1..n {
                y[r] = y[r] - self.lu[r * n + k] * y[k];
            }
            y[r] = y[r] / self.lu[r * n + r];
        }
        y
    }

    /// `k(x,x) − k_Tᵀ (K_TT + λI)⁻¹ k_T`.
    pub fn variance(&self, k_t: &[f64], k_xx: f64) -> Result<f64> {
        if k_t.len() != self.n {
            return Err(Error::DimMismatch { expected: self.n, got: k_t.len() });
        }
        let alpha = self.solve(k_t);
        let mut quad = Dd::ZERO;
        for (a, &k) in alpha.iter().zip(k_t) {
            quad = quad + *a * Dd::from(k);
        }
        let v = (Dd::from(k_xx) - quad).to_f64();
        if !v.is_finite() {
            return Err(Error::NonFinite("kernel posterior variance".into()));
        }
        Ok(v)
    }
}

/// Gaussian posterior variance of one candidate given its kernel row against
/// the training set, its self-similarity and the training kernel.
pub fn kernel_pv(k_t: &[f64], k_xx: f64, k_tt: &DenseKernel, ridge: f64) -> Result<f64> {
    KernelPosterior::new(k_tt, ridge)?.variance(k_t, k_xx)
}

/// Posterior variance of every pool row given the training rows, through the
/// explicit kernel.
pub fn kernel_pv_all(train: &[f64], pool: &[f64], dim: usize, ridge: f64) -> Result<Vec<f64>> {
    let k_tt = DenseKernel::linear(train, dim, "linear")?;
    let post = KernelPosterior::new(&k_tt, ridge)?;
    let n_t = k_tt.n;
    pool.chunks_exact(dim)
        .map(|x| {
            let mut k_t = vec![0.0; n_t];
            for (t, kt) in k_t.iter_mut().enumerate() {
                for k in 0..dim {
                    *kt += train[t * dim + k] * x[k];
                }
            }
            let mut k_xx = 0.0;
            for v in x {
                k_xx += v * v;
            }
            post.variance(&k_t, k_xx)
        })
        .collect()
}

/// Indices of the `k` largest scores by full sort; ties go to the lower index.
pub fn dense_top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePick {
    pub position: usize,
    pub cluster: usize,
    pub cluster_mass: f64,
    pub distance: f64,
}

/// Quadratic LCMD: full distance matrix over centres and candidates, every
/// assignment recomputed from scratch at each step.
pub fn reference_lcmd(candidates: &[f64], centres: &[f64], dim: usize, batch: usize) -> Result<Vec<ReferencePick>> {
    if dim == 0 || !candidates.len().is_multiple_of(dim) || !centres.len().is_multiple_of(dim) {
        return Err(Error::shape("rows do not match dim"));
    }
    let n_c = centres.len() / dim;
    let n_x = candidates.len() / dim;
    if n_c == 0 {
        return Err(Error::Empty("centre set"));
    }
    if batch == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let point = |i: usize| {
        if i < n_c {
            &centres[i * dim..(i + 1) * dim]
        } else {
            &candidates[(i - n_c) * dim..(i - n_c + 1) * dim]
        }
    };
    let n = n_c + n_x;
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (point(i), point(j));
            let mut s = 0.0;
            for k in 0..dim {
                let diff = a[k] - b[k];
                s += diff * diff;
            }
            dist[i * n + j] = s;
        }
    }
    // centre ids: training centres first, then picks in order
    let mut centre_points: Vec<usize> = (0..n_c).collect();
    let mut chosen = vec![false; n_x];
    let mut out = Vec::new();
    for _ in 0..batch.min(n_x) {
        let mut owner = vec![0usize; n_x];
        let mut d_own = vec![0.0; n_x];
        let mut mass = vec![0.0; centre_points.len()];
        let mut members = vec![0usize; centre_points.len()];
        for x in 0..n_x {
            if chosen[x] {
                continue;
            }
            let row = &dist[(n_c + x) * n..(n_c + x + 1) * n];
            let mut best = 0;
            for c in 1..centre_points.len() {
                if row[centre_points[c]] < row[centre_points[best]] {
                    best = c;
                }
            }
            owner[x] = best;
            d_own[x] = row[centre_points[best]];
        }
        // masses summed in candidate order
        for x in 0..n_x {
            if !chosen[x] {
                mass[owner[x]] += d_own[x];
                members[owner[x]] += 1;
            }
        }
        let mut cluster = None;
        for c in 0..centre_points.len() {
            if members[c] > 0 && cluster.is_none_or(|b: usize| mass[c] > mass[b]) {
                cluster = Some(c);
            }
        }
        let cluster = cluster.expect("an unchosen candidate exists");
        let mut far = None;
        for x in 0..n_x {
            if !chosen[x] && owner[x] == cluster && far.is_none_or(|f: usize| d_own[x] > d_own[f]) {
                far = Some(x);
            }
        }
        let x = far.expect("cluster has members");
        chosen[x] = true;
        centre_points.push(n_c + x);
        out.push(ReferencePick { position: x, cluster, cluster_mass: mass[cluster], distance: d_own[x] });
    }
    Ok(out)
}

/// Maximum relative error of `grad` against central differences of `f` at
/// `point`, relative to the largest gradient component.
pub fn fd_gradient_check<F>(f: F, grad: &[f64], point: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if grad.len() != point.len() {
        return Err(Error::DimMismatch { expected: point.len(), got: grad.len() });
    }
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(f64::MIN_POSITIVE);
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for k in 0..point.len() {
        x[k] = point[k] + step;
        let up = f(&x);
        x[k] = point[k] - step;
        let dn = f(&x);
        x[k] = point[k];
        if !up.is_finite() || !dn.is_finite() {
            return Err(Error::NonFinite(format!("function value near coordinate {k}")));
        }
        let fd = (up - dn) / (2.0 * step);
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    Ok(worst)
}

/// Observed convergence order from errors at step `h` and `h/2`.
pub fn observed_order(err_h: f64, err_half: f64) -> f64 {
    (err_h / err_half).log2()
}
