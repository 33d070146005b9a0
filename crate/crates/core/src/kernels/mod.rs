//! Feature maps and kernels.
//!
//! All model-derived kernels are inner products of cosine-normalised feature
//! vectors. Binary fingerprints use the Tanimoto kernel instead.

mod features;
mod maps;
pub mod pffm;
mod tanimoto;

pub use features::{cosine_normalize, dot, force_ntk_feature, joint_feature, JointWeights};
pub use maps::FeatureMap;
pub use pffm::{FeatureMatrix, Precision};
pub use tanimoto::{tanimoto, BitVector};
