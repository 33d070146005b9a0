use crate::error::{Error, Result};
use crate::potential::MixedJacobian;

const ZERO_NORM: f64 = 1e-300;
const NORM_TOLERANCE: f64 = 1e-6;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales `v` to unit ℓ₂ norm. A zero vector is an error.
pub fn cosine_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("feature vector entry".into()));
    }
    let norm = dot(v, v).sqrt();
    if norm < ZERO_NORM {
        return Err(Error::ZeroVector(norm));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Root-mean-square over atoms of each parameter's Jacobian row:
/// `φ_F[p] = sqrt(Σ_{i,α} J[p,i,α]² / N)`.
pub fn force_ntk_feature(j: &MixedJacobian) -> Result<Vec<f64>> {
    if j.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("mixed jacobian entry".into()));
    }
    let inv_n = 1.0 / j.n_atoms() as f64;
    Ok((0..j.n_params())
        .map(|p| (j.row(p).iter().map(|x| x * x).sum::<f64>() * inv_n).sqrt())
        .collect())
}

/// Relative weights of the energy and force blocks of a joint feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointWeights {
    energy: f64,
    force: f64,
}

impl Default for JointWeights {
    /// Balanced 1:1 weighting.
    fn default() -> Self {
        Self { energy: 1.0, force: 1.0 }
    }
}

impl JointWeights {
    pub fn new(energy: f64, force: f64) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(energy) || !ok(force) {
            return Err(Error::invalid(format!("joint weights must be finite and >= 0, got ({energy}, {force})")));
        }
        if energy == 0.0 && force == 0.0 {
            return Err(Error::invalid("joint weights cannot both be zero"));
        }
        Ok(Self { energy, force })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn force(&self) -> f64 {
        self.force
    }
}

fn check_unit(v: &[f64]) -> Result<()> {
    let norm = dot(v, v).sqrt();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

/// `[√w_E·φ_E, √w_F·φ_F]` for separately normalised inputs, so that
/// `⟨φ_EF(x), φ_EF(x')⟩ = w_E·k_E + w_F·k_F`.
pub fn joint_feature(energy: &[f64], force: &[f64], w: JointWeights) -> Result<Vec<f64>> {
    check_unit(energy)?;
    check_unit(force)?;
    let (se, sf) = (w.energy.sqrt(), w.force.sqrt());
    let mut out = Vec::with_capacity(energy.len() + force.len());
    out.extend(energy.iter().map(|v| se * v));
    out.extend(force.iter().map(|v| sf * v));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(cosine_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(cosine_normalize(&[-2.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(cosine_normalize(&[0.0, 1.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(matches!(cosine_normalize(&[0.0, 0.0]), Err(Error::ZeroVector(_))));
        assert!(matches!(cosine_normalize(&[f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn force_feature_examples() {
        let zero = MixedJacobian::from_raw(2, 3, vec![0.0; 18]).unwrap();
        assert_eq!(force_ntk_feature(&zero).unwrap(), vec![0.0, 0.0]);
        let one = MixedJacobian::from_raw(1, 1, vec![3.0, 4.0, 0.0]).unwrap();
        assert_eq!(force_ntk_feature(&one).unwrap(), vec![5.0]);
    }

    #[test]
    fn joint_weight_validation() {
        assert!(JointWeights::new(0.0, 0.0).is_err());
        assert!(JointWeights::new(-1.0, 1.0).is_err());
        assert!(JointWeights::new(0.0, 1.0).is_ok());
        assert_eq!(JointWeights::default(), JointWeights::new(1.0, 1.0).unwrap());
    }

    #[test]
    fn joint_rejects_unnormalized() {
        let e = [1.0, 0.0];
        assert!(matches!(joint_feature(&e, &[2.0, 0.0], JointWeights::default()), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn joint_self_similarity_is_weight_sum() {
        let e = cosine_normalize(&[1.0, 2.0, 3.0]).unwrap();
        let f = cosine_normalize(&[0.5, -1.0]).unwrap();
        let j = joint_feature(&e, &f, JointWeights::default()).unwrap();
        assert!((dot(&j, &j) - 2.0).abs() < 1e-12);
        let only_e = joint_feature(&e, &f, JointWeights::new(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(&only_e[..3], e.as_slice());
        assert!(only_e[3..].iter().all(|&v| v == 0.0));
    }

    fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, d).prop_filter("nonzero", |v| dot(v, v) > 1e-6)
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(v in nonzero_vec(7)) {
            let once = cosine_normalize(&v).unwrap();
            let twice = cosine_normalize(&once).unwrap();
            prop_assert!((dot(&once, &once).sqrt() - 1.0).abs() < 1e-12);
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }

        #[test]
        fn joint_kernel_is_weighted_sum(
            e1 in nonzero_vec(5), e2 in nonzero_vec(5),
            f1 in nonzero_vec(4), f2 in nonzero_vec(4),
            we in 0.0f64..40.0, wf in 0.01f64..40.0,
        ) {
            let (e1, e2) = (cosine_normalize(&e1).unwrap(), cosine_normalize(&e2).unwrap());
            let (f1, f2) = (cosine_normalize(&f1).unwrap(), cosine_normalize(&f2).unwrap());
            let w = JointWeights::new(we, wf).unwrap();
            let j1 = joint_feature(&e1, &f1, w).unwrap();
            let j2 = joint_feature(&e2, &f2, w).unwrap();
            let want = we * dot(&e1, &e2) + wf * dot(&f1, &f2);
            prop_assert!((dot(&j1, &j2) - want).abs() < 1e-12 * (1.0 + we + wf));
            let k = dot(&e1, &e2);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        }
    }
}
