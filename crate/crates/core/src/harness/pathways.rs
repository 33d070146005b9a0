//! Synthetic reaction pathways labelled by a teacher potential.
//!
//! Each family has a reactant and a product template of fixed composition,
//! drawn from a few species and scaled by a family-specific spacing.
//! An instance perturbs both endpoints, and its frames interpolate linearly
//! between them with per-frame Gaussian jitter.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::potential::{self, DescriptorConfig, LabeledStructure, ModelParams, Structure, Vec3};
use crate::rng::StreamRng;

const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PathwaySpec {
    /// Instance count per family; the family count R is its length.
    pub instances: Vec<usize>,
    /// Frames per path, endpoints included.
    pub frames: usize,
    /// Inclusive atom-count range per family.
    pub atoms: (usize, usize),
    pub n_species: usize,
    /// Each family draws its atoms from this many consecutive species
    /// (cyclically), starting at a random one.
    pub species_per_family: usize,
    /// Range of the per-family spacing scale applied to template geometries.
    pub spacing: (f64, f64),
    /// Standard deviation (Å) of the per-instance endpoint perturbation.
    pub perturbation: f64,
    /// Standard deviation (Å) of the per-frame jitter.
    pub jitter: f64,
    /// Distance (Å) moved by reacting atoms between reactant and product.
    pub reaction_shift: f64,
    pub min_distance: f64,
}

impl Default for PathwaySpec {
    fn default() -> Self {
        Self {
            instances: vec![20, 40, 80, 120, 140],
            frames: 10,
            atoms: (4, 9),
            n_species: 4,
            species_per_family: 2,
            spacing: (0.7, 1.3),
            perturbation: 0.15,
            jitter: 0.05,
            reaction_shift: 1.5,
            min_distance: 0.5,
        }
    }
}

impl PathwaySpec {
    pub fn families(&self) -> usize {
        self.instances.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.instances.is_empty() || self.instances.contains(&0) {
            return Err(Error::invalid("every family needs at least one instance"));
        }
        if self.frames < 2 {
            return Err(Error::invalid(format!("paths need at least 2 frames, got {}", self.frames)));
        }
        if self.atoms.0 < 2 || self.atoms.0 > self.atoms.1 {
            return Err(Error::invalid(format!("bad atom range {:?}", self.atoms)));
        }
        if self.n_species == 0 {
            return Err(Error::invalid("need at least one species"));
        }
        if self.species_per_family == 0 || self.species_per_family > self.n_species {
            return Err(Error::invalid(format!(
                "species per family must be in 1..={}, got {}",
                self.n_species, self.species_per_family
            )));
        }
        let (lo, hi) = self.spacing;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(format!("bad spacing range {:?}", self.spacing)));
        }
        let positive = [self.reaction_shift, self.min_distance];
        let non_negative = [self.perturbation, self.jitter];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::invalid("pathway length scales must be finite and positive"));
        }
        Ok(())
    }
}

/// A labelled frame with its family, instance and frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedStructure {
    pub label: LabeledStructure,
    pub family: usize,
    pub instance: usize,
    pub frame: usize,
}

fn gaussian(rng: &mut StreamRng, scale: f64) -> Vec3 {
    [
        scale * rng.sample::<f64, _>(StandardNormal),
        scale * rng.sample::<f64, _>(StandardNormal),
        scale * rng.sample::<f64, _>(StandardNormal),
    ]
}

fn min_distance(pos: &[Vec3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let d = (0..3).map(|a| (pos[i][a] - pos[j][a]).powi(2)).sum::<f64>();
            best = best.min(d);
        }
    }
    best.sqrt()
}

struct Template {
    species: Vec<usize>,
    reactant: Vec<Vec3>,
    product: Vec<Vec3>,
}

fn template(spec: &PathwaySpec, rng: &mut StreamRng, family: usize) -> Result<Template> {
    let n = rng.random_range(spec.atoms.0..=spec.atoms.1);
    let first = rng.random_range(0..spec.n_species);
    let species: Vec<usize> =
        (0..n).map(|_| (first + rng.random_range(0..spec.species_per_family)) % spec.n_species).collect();
    let (lo, hi) = spec.spacing;
    let scale = if lo < hi { rng.random_range(lo..hi) } else { lo };
    let side = scale * (1.6 * (n as f64).cbrt() + 0.5);
    for _ in 0..MAX_ATTEMPTS {
        let reactant: Vec<Vec3> = (0..n)
            .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side)])
            .collect();
        if min_distance(&reactant) < scale {
            continue;
        }
        let mut product = reactant.clone();
        let movers = 1 + n / 4;
        for atom in rand::seq::index::sample(rng, n, movers) {
            let dir = gaussian(rng, 1.0);
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let len = spec.reaction_shift * rng.random_range(0.7..1.3);
            for a in 0..3 {
                product[atom][a] += len * dir[a] / norm;
            }
        }
        if min_distance(&product) >= scale {
            return Ok(Template { species, reactant, product });
        }
    }
    Err(Error::Geometry(format!("no valid template for family {family} after {MAX_ATTEMPTS} attempts")))
}

fn path(spec: &PathwaySpec, t: &Template, rng: &mut StreamRng, family: usize, instance: usize) -> Result<Vec<Vec<Vec3>>> {
    let n = t.species.len();
    for _ in 0..MAX_ATTEMPTS {
        let perturb = |rng: &mut StreamRng, base: &[Vec3]| -> Vec<Vec3> {
            base.iter()
                .map(|p| {
                    let g = gaussian(rng, spec.perturbation);
                    [p[0] + g[0], p[1] + g[1], p[2] + g[2]]
                })
                .collect()
        };
        let a = perturb(rng, &t.reactant);
        let b = perturb(rng, &t.product);
        let mut frames = Vec::with_capacity(spec.frames);
        for f in 0..spec.frames {
            let s = f as f64 / (spec.frames - 1) as f64;
            let pos: Vec<Vec3> = (0..n)
                .map(|i| {
                    let g = gaussian(rng, spec.jitter);
                    [
                        (1.0 - s) * a[i][0] + s * b[i][0] + g[0],
                        (1.0 - s) * a[i][1] + s * b[i][1] + g[1],
                        (1.0 - s) * a[i][2] + s * b[i][2] + g[2],
                    ]
                })
                .collect();
            frames.push(pos);
        }
        if frames.iter().all(|p| min_distance(p) >= spec.min_distance) {
            return Ok(frames);
        }
    }
    Err(Error::Geometry(format!(
        "family {family} instance {instance}: no path with minimum distance {} Å after {MAX_ATTEMPTS} attempts",
        spec.min_distance
    )))
}

/// All frames of all instances of all families, in (family, instance, frame)
/// order, each labelled by `teacher`.
pub fn generate_pathways(
    spec: &PathwaySpec,
    teacher: &ModelParams,
    cfg: &DescriptorConfig,
    rng: &mut StreamRng,
) -> Result<Vec<TaggedStructure>> {
    spec.validate()?;
    if spec.n_species > teacher.dims.n_species {
        return Err(Error::invalid(format!(
            "{} species requested but the teacher knows {}",
            spec.n_species, teacher.dims.n_species
        )));
    }
    let templates: Vec<Template> = (0..spec.families()).map(|r| template(spec, rng, r)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (family, t) in templates.iter().enumerate() {
        for instance in 0..spec.instances[family] {
            for (frame, pos) in path(spec, t, rng, family, instance)?.into_iter().enumerate() {
                let structure = Structure::new(t.species.clone(), pos)?;
                let (energy, forces) = potential::energy_and_forces(teacher, cfg, &structure)?;
                out.push(TaggedStructure {
                    label: LabeledStructure::new(structure, energy, forces)?,
                    family,
                    instance,
                    frame,
                });
            }
        }
    }
    Ok(out)
}
