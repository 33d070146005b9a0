use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Radial basis used by the per-atom descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    /// Cutoff radius r_c in Å.
    pub cutoff: f64,
    /// Gaussian centres in Å, strictly increasing.
    pub centers: Vec<f64>,
    /// Gaussian width in Å.
    pub width: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self::equally_spaced(5.0, 8, 0.5).expect("default descriptor is valid")
    }
}

impl DescriptorConfig {
    /// `n` centres equally spaced on [0.5, cutoff].
    pub fn equally_spaced(cutoff: f64, n: usize, width: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("descriptor needs at least one radial centre"));
        }
        let centers = if n == 1 {
            vec![0.5]
        } else {
            let step = (cutoff - 0.5) / (n - 1) as f64;
            (0..n).map(|k| 0.5 + step * k as f64).collect()
        };
        let cfg = Self { cutoff, centers, width };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::invalid(format!("cutoff must be positive, got {}", self.cutoff)));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid(format!("rbf width must be positive, got {}", self.width)));
        }
        if self.centers.is_empty() || self.centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("radial centres must be non-empty and strictly increasing"));
        }
        Ok(())
    }

    pub fn n_radial(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub n_species: usize,
    pub emb_dim: usize,
    pub n_radial: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn input_dim(&self) -> usize {
        self.n_radial + self.emb_dim
    }

    pub fn n_params(&self) -> usize {
        self.n_species * self.emb_dim + self.hidden * self.input_dim() + 2 * self.hidden + 1
    }
}

/// Parameter blocks that a feature map can differentiate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamSubset {
    Embeddings,
    Hidden,
    Readout,
    All,
}

impl FromStr for ParamSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "embeddings" | "embedding" => Ok(Self::Embeddings),
            "hidden" => Ok(Self::Hidden),
            "readout" => Ok(Self::Readout),
            "all" => Ok(Self::All),
            _ => Err(Error::UnknownName { kind: "parameter subset", name: s.to_string() }),
        }
    }
}

impl ParamSubset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Embeddings => "embeddings",
            Self::Hidden => "hidden",
            Self::Readout => "readout",
            Self::All => "all",
        }
    }
}

/// Weights of the surrogate potential.
///
/// Flattened order (used by gradients, feature files and `PFPM` records):
/// embedding rows, `w1` row-major (`hidden × (n_radial + emb_dim)`), `b1`,
/// `w2`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    /// `n_species × emb_dim`, row-major.
    pub embedding: Vec<f64>,
    /// `hidden × input_dim`, row-major; descriptor columns first.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

const PFPM_MAGIC: &[u8; 4] = b"PFPM";
const PFPM_VERSION: u32 = 1;

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            embedding: vec![0.0; dims.n_species * dims.emb_dim],
            w1: vec![0.0; dims.hidden * dims.input_dim()],
            b1: vec![0.0; dims.hidden],
            w2: vec![0.0; dims.hidden],
            b2: 0.0,
        }
    }

    /// Gaussian initialisation with fan-in scaling.
    pub fn init<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let w1_scale = 1.0 / (dims.input_dim() as f64).sqrt();
        let w2_scale = 1.0 / (dims.hidden as f64).sqrt();
        p.embedding.iter_mut().for_each(|v| *v = unit.sample(rng));
        p.w1.iter_mut().for_each(|v| *v = w1_scale * unit.sample(rng));
        p.b1.iter_mut().for_each(|v| *v = 0.1 * unit.sample(rng));
        p.w2.iter_mut().for_each(|v| *v = w2_scale * unit.sample(rng));
        p.b2 = 0.0;
        p
    }

    pub fn n_params(&self) -> usize {
        self.dims.n_params()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        let checks = [
            ("embedding", self.embedding.len(), d.n_species * d.emb_dim),
            ("w1", self.w1.len(), d.hidden * d.input_dim()),
            ("b1", self.b1.len(), d.hidden),
            ("w2", self.w2.len(), d.hidden),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::shape(format!("{name} has {got} entries, expected {want}")));
            }
        }
        if d.hidden == 0 || d.n_species == 0 {
            return Err(Error::shape("hidden width and species count must be positive"));
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(())
    }

    /// Index range of a parameter subset within the flattened vector.
    pub fn subset_range(dims: ModelDims, subset: ParamSubset) -> Range<usize> {
        let emb = dims.n_species * dims.emb_dim;
        let w1 = dims.hidden * dims.input_dim();
        let total = dims.n_params();
        match subset {
            ParamSubset::Embeddings => 0..emb,
            ParamSubset::Hidden => emb..emb + w1 + dims.hidden,
            ParamSubset::Readout => emb + w1 + dims.hidden..total,
            ParamSubset::All => 0..total,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.embedding);
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    pub fn from_flat(dims: ModelDims, flat: &[f64]) -> Result<Self> {
        if flat.len() != dims.n_params() {
            return Err(Error::DimMismatch { expected: dims.n_params(), got: flat.len() });
        }
        let mut p = Self::zeros(dims);
        p.assign_flat(flat);
        Ok(p)
    }

    pub(crate) fn assign_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for block in [&mut self.embedding, &mut self.w1, &mut self.b1, &mut self.w2] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        self.b2 = rest[0];
    }

    /// Applies `theta += scale * delta` over the flattened order.
    pub(crate) fn axpy(&mut self, scale: f64, delta: &[f64]) {
        let mut rest = delta;
        for block in [&mut self.embedding, &mut self.w1, &mut self.b1, &mut self.w2] {
            let (head, tail) = rest.split_at(block.len());
            block.iter_mut().zip(head).for_each(|(v, d)| *v += scale * d);
            rest = tail;
        }
        self.b2 += scale * rest[0];
    }

    pub fn write_pfpm<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(PFPM_MAGIC)?;
        w.write_all(&PFPM_VERSION.to_le_bytes())?;
        let d = self.dims;
        for dim in [d.n_species, d.emb_dim, d.n_radial, d.hidden, d.n_params()] {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
        for v in self.flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_pfpm<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PFPM_MAGIC {
            return Err(Error::Format("missing PFPM magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != PFPM_VERSION {
            return Err(Error::Format(format!("unsupported PFPM version {version}")));
        }
        let mut dims = [0usize; 5];
        let mut b8 = [0u8; 8];
        for d in dims.iter_mut() {
            r.read_exact(&mut b8)?;
            *d = u64::from_le_bytes(b8) as usize;
        }
        let md = ModelDims { n_species: dims[0], emb_dim: dims[1], n_radial: dims[2], hidden: dims[3] };
        if md.n_params() != dims[4] {
            return Err(Error::Format(format!(
                "PFPM parameter count {} disagrees with dims ({})",
                dims[4],
                md.n_params()
            )));
        }
        let mut flat = Vec::with_capacity(dims[4]);
        for _ in 0..dims[4] {
            r.read_exact(&mut b8)?;
            flat.push(f64::from_le_bytes(b8));
        }
        let p = Self::from_flat(md, &flat)?;
        p.validate()?;
        Ok(p)
    }
}
