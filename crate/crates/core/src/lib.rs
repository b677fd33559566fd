//! Reconstruction of transverse-field Ising ground states with restricted
//! Boltzmann machines, and the tooling to measure how many hidden units,
//! weights and measurements a reconstruction needs.
//!
//! The pieces, bottom-up:
//! - [`tfim`]: exact ground states (Lanczos) and a free-fermion energy check.
//! - [`dataset`]: σ^z measurement datasets sampled from a ground state.
//! - [`rbm`]: the RBM, Gibbs sampling, CD-k training and exact enumeration.
//! - [`estimator`]: Monte Carlo energy estimates and the relative-error criterion.
//! - [`pruner`]: iterative magnitude pruning with fine-tuning.
//! - [`symmetry`]: spin-basis RBMs and global spin-flip diagnostics.
//! - [`harness`]: sweeps, fits, config files, CSV outputs and run manifests.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod math;
pub mod pruner;
pub mod rbm;
pub mod symmetry;
pub mod tfim;

pub use error::{Error, Result};
