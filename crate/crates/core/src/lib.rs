//! Sampling laboratory for Hessian-free high-resolution (HFHR) dynamics and
//! kinetic Langevin Monte Carlo (KLMC): samplers, reflection couplings,
//! explicit contraction constants and Wasserstein diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod integrators;
pub mod linalg;
pub mod metrics;
pub mod numerics;
pub mod potentials;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use potentials::{AssumptionConstants, PotentialModel};
