use super::features::{cosine_normalize, force_ntk_feature, joint_feature, JointWeights};
use crate::error::{Error, Result};
use crate::potential::{
    self, DescriptorConfig, ModelParams, ParamSubset, Structure, DEFAULT_JACOBIAN_STEP,
};

/// A structure embedding derived from the model, cosine-normalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureMap {
    /// `∇_θP E`
    EnergyNtk { subset: ParamSubset },
    /// RMS over atoms of the mixed Jacobian `∇_θP F`.
    ForceNtk { subset: ParamSubset, step: f64 },
    /// Separately normalised energy and force NTK blocks, weighted.
    JointNtk { subset: ParamSubset, weights: JointWeights, step: f64 },
    /// Pooled hidden activations.
    Activation,
}

impl FeatureMap {
    pub fn parse(name: &str, subset: ParamSubset, weights: JointWeights) -> Result<Self> {
        let step = DEFAULT_JACOBIAN_STEP;
        match name.trim().to_ascii_lowercase().as_str() {
            "ntk-e" | "ntk" => Ok(Self::EnergyNtk { subset }),
            "ntk-f" => Ok(Self::ForceNtk { subset, step }),
            "ntk-ef" => Ok(Self::JointNtk { subset, weights, step }),
            "activation" => Ok(Self::Activation),
            _ => Err(Error::UnknownName { kind: "feature map", name: name.to_string() }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::EnergyNtk { .. } => "ntk-e",
            Self::ForceNtk { .. } => "ntk-f",
            Self::JointNtk { .. } => "ntk-ef",
            Self::Activation => "activation",
        }
    }

    pub fn dim(&self, params: &ModelParams) -> usize {
        let sub = |s| ModelParams::subset_range(params.dims, s).len();
        match *self {
            Self::EnergyNtk { subset } | Self::ForceNtk { subset, .. } => sub(subset),
            Self::JointNtk { subset, .. } => 2 * sub(subset),
            Self::Activation => params.dims.hidden,
        }
    }

    pub fn compute(&self, params: &ModelParams, cfg: &DescriptorConfig, x: &Structure) -> Result<Vec<f64>> {
        match *self {
            Self::EnergyNtk { subset } => {
                cosine_normalize(&potential::grad_params_energy(params, subset, cfg, x)?)
            }
            Self::ForceNtk { subset, step } => {
                let j = potential::mixed_jacobian(params, subset, cfg, x, step)?;
                cosine_normalize(&force_ntk_feature(&j)?)
            }
            Self::JointNtk { subset, weights, step } => {
                let e = cosine_normalize(&potential::grad_params_energy(params, subset, cfg, x)?)?;
                let j = potential::mixed_jacobian(params, subset, cfg, x, step)?;
                let f = cosine_normalize(&force_ntk_feature(&j)?)?;
                joint_feature(&e, &f, weights)
            }
            Self::Activation => cosine_normalize(&potential::activation_feature(params, cfg, x)?),
        }
    }

    /// Features for many structures, row-major `structures.len() × dim`.
    pub fn compute_all(&self, params: &ModelParams, cfg: &DescriptorConfig, structures: &[&Structure]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(structures.len() * self.dim(params));
        for s in structures {
            out.extend(self.compute(params, cfg, s)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::dot;
    use crate::potential::{rotation_from_uniform, ModelDims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ModelParams, DescriptorConfig, Structure) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::init(ModelDims { n_species: 2, emb_dim: 3, n_radial: 8, hidden: 5 }, &mut rng);
        let x = Structure::new(
            vec![0, 1, 1, 0],
            vec![[0.0, 0.0, 0.0], [1.1, 0.2, 0.0], [0.3, 1.4, -0.2], [-0.9, 0.5, 1.0]],
        )
        .unwrap();
        (p, DescriptorConfig::default(), x)
    }

    #[test]
    fn features_are_unit_norm_with_expected_dims() {
        let (p, cfg, x) = setup();
        let w = JointWeights::default();
        for name in ["ntk-e", "ntk-f", "ntk-ef", "activation"] {
            let map = FeatureMap::parse(name, ParamSubset::All, w).unwrap();
            let v = map.compute(&p, &cfg, &x).unwrap();
            assert_eq!(v.len(), map.dim(&p));
            let want = if name == "ntk-ef" { 2.0 } else { 1.0 };
            assert!((dot(&v, &v) - want).abs() < 1e-12, "{name}");
        }
        assert!(FeatureMap::parse("soap", ParamSubset::All, w).is_err());
    }

    #[test]
    fn force_feature_is_rotation_invariant() {
        let (p, cfg, x) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = FeatureMap::ForceNtk { subset: ParamSubset::All, step: DEFAULT_JACOBIAN_STEP };
        let raw = |s: &Structure| {
            force_ntk_feature(&potential::mixed_jacobian(&p, ParamSubset::All, &cfg, s, DEFAULT_JACOBIAN_STEP).unwrap()).unwrap()
        };
        let a = raw(&x);
        for _ in 0..5 {
            let rot = rotation_from_uniform([rng.random(), rng.random(), rng.random()]);
            let b = raw(&x.rotated(&rot));
            let num: f64 = a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            assert!(num / dot(&a, &a).sqrt() < 1e-6);
        }
        assert!(map.compute(&p, &cfg, &x).is_ok());
    }

    #[test]
    fn readout_force_feature_flat_surface_is_a_zero_vector_error() {
        let (p, cfg, _) = setup();
        let far = Structure::new(vec![0, 1], vec![[0.0; 3], [10.0, 0.0, 0.0]]).unwrap();
        let map = FeatureMap::ForceNtk { subset: ParamSubset::Readout, step: DEFAULT_JACOBIAN_STEP };
        assert!(matches!(map.compute(&p, &cfg, &far), Err(Error::ZeroVector(_))));
    }
}
