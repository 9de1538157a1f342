//! Partition-function estimation for discrete Gibbs distributions with
//! multiplicative `(ε, δ)` guarantees.
//!
//! The crate is organised bottom-up:
//!
//! - [`models`]: finite-domain Hamiltonians (2D Ising lattice, logical voting,
//!   explicit energy tables) and the constant-offset transform that makes them
//!   nonnegative.
//! - [`chains`]: single-site Gibbs (Glauber) chains, weighted product chains,
//!   explicit-matrix chains and warm-start sampling.
//! - [`oracle`]: brute-force ground truth for small state spaces (exact `Z(β)`,
//!   exact sampling, spectral data, exact trace variances).
//! - [`tpa`]: TPA cooling schedules, the original single-run process and the
//!   `(k, d)` thinned variant.
//! - [`estimators`]: paired product estimators, their tensor products and
//!   variance diagnostics.
//! - [`meanest`]: the adaptive multiplicative MCMC mean estimator.
//! - [`pipelines`]: end-to-end estimators (super-chain, parallel, and the
//!   black-box TPA + PPE baseline).
//! - [`sweep`]: the experiment harness used by the command-line tool.
//!
//! ```
//! use gibbs_partition::models::IsingModel;
//! use gibbs_partition::oracle::Enumeration;
//!
//! let model = IsingModel::new(2);
//! let exact = Enumeration::new(&model, 1 << 20).unwrap().exact_partition(0.0);
//! assert_eq!(exact.z, 16.0);
//! ```

pub mod chains;
pub mod error;
pub mod estimators;
pub mod meanest;
pub mod models;
pub mod oracle;
pub mod pipelines;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod tpa;

pub use error::{Error, Result};
