use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// One atomic configuration: species indices plus Cartesian positions in Å.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    species: Vec<usize>,
    positions: Vec<Vec3>,
}

impl Structure {
    pub fn new(species: Vec<usize>, positions: Vec<Vec3>) -> Result<Self> {
        if species.is_empty() && positions.is_empty() {
            return Err(Error::EmptyStructure);
        }
        if species.len() != positions.len() {
            return Err(Error::shape(format!(
                "{} species for {} positions",
                species.len(),
                positions.len()
            )));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("atomic coordinate".into()));
        }
        Ok(Self { species, positions })
    }

    pub fn n_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[usize] {
        &self.species
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Copy with every position shifted by `t`.
    pub fn translated(&self, t: Vec3) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]])
            .collect();
        Self { species: self.species.clone(), positions }
    }

    /// Copy with every position multiplied by the row-major 3×3 matrix `rot`.
    pub fn rotated(&self, rot: &[[f64; 3]; 3]) -> Self {
        let positions = self.positions.iter().map(|p| mat_vec(rot, p)).collect();
        Self { species: self.species.clone(), positions }
    }

    /// Copy with atom `atom`, axis `axis` displaced by `delta`.
    pub fn displaced(&self, atom: usize, axis: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.positions[atom][axis] += delta;
        out
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in (i + 1)..self.positions.len() {
                best = best.min(distance(&self.positions[i], &self.positions[j]));
            }
        }
        best
    }
}

/// A structure with its reference energy (eV) and per-atom forces (eV/Å).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStructure {
    pub structure: Structure,
    pub energy: f64,
    pub forces: Vec<Vec3>,
}

impl LabeledStructure {
    pub fn new(structure: Structure, energy: f64, forces: Vec<Vec3>) -> Result<Self> {
        if forces.len() != structure.n_atoms() {
            return Err(Error::shape(format!(
                "{} force vectors for {} atoms",
                forces.len(),
                structure.n_atoms()
            )));
        }
        Ok(Self { structure, energy, forces })
    }
}

pub(crate) fn mat_vec(m: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn distance(a: &Vec3, b: &Vec3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Rotation matrix from a unit quaternion built from three uniform numbers in [0, 1).
pub fn rotation_from_uniform(u: [f64; 3]) -> [[f64; 3]; 3] {
    use std::f64::consts::PI;
    let (a, b) = ((1.0 - u[0]).sqrt(), u[0].sqrt());
    let (t1, t2) = (2.0 * PI * u[1], 2.0 * PI * u[2]);
    let (w, x, y, z) = (a * t1.sin(), a * t1.cos(), b * t2.sin(), b * t2.cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}
