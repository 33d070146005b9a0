//! Batch active-learning acquisition for energy/force regression.
//!
//! The crate is organised around the acquisition pipeline:
//!
//! - [`potential`]: a small differentiable surrogate potential that supplies
//!   energies, forces and the derivatives the feature maps need.
//! - [`kernels`]: energy, force and joint NTK features, activation features
//!   and the Tanimoto kernel.
//! - [`acquisition`]: chunked Gram accumulation, feature-space posterior
//!   variance, streaming top-K shortlisting, LCMD, greedy PV, committee and
//!   random selection.
//! - [`oracle`]: brute-force references used to validate the engine.
//! - [`harness`]: synthetic reaction-pathway benchmark and the offline
//!   active-learning loop.
//! - [`cli`]: configuration and the command-line workflows.

pub mod acquisition;
pub mod cli;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod oracle;
pub mod potential;
pub mod rng;

pub use error::{Error, Result};
