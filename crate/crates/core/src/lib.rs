//! Trajectory Poisson multi-Bernoulli (TPMB) filters for multi-target tracking.
//!
//! The crate propagates a Poisson multi-Bernoulli density over sets of
//! trajectories through a Bayesian filtering recursion. Two problem
//! formulations are supported: estimating the set of trajectories alive at
//! the current time step, and estimating the set of all trajectories that
//! have ever existed. After each measurement update the posterior is a PMB
//! mixture; a Kullback-Leibler projection on an augmented trajectory space
//! brings it back to PMB form while preserving the intensity (PHD).
//!
//! Module map:
//! - [`types`]: trajectories, single-trajectory Gaussian densities, Bernoulli
//!   components and the PMB posterior.
//! - [`oracle`]: brute-force density evaluators used as independent test
//!   oracles (exponential cost, size-capped).
//! - [`models`]: motion, birth, sensor and clutter models, including the
//!   range-bearings sensor with first-order linearization.
//! - [`assignment`]: Hungarian and Murty k-best 2-D assignment solvers,
//!   ellipsoidal gating and global-hypothesis counting.
//! - [`filter`]: prediction, update, PMB projection, L-scan truncation,
//!   pruning and trajectory estimation for both variants.
//! - [`metrics`]: GOSPA with localization/missed/false decomposition and the
//!   RMS aggregations used by the benchmark harness.
//! - [`simulator`]: seeded ground-truth and measurement generation.
//! - [`harness`]: Monte Carlo campaign driver with CSV/JSON result emission.

pub mod assignment;
pub mod error;
pub mod filter;
pub mod gaussian;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod oracle;
pub mod selftest;
pub mod serde_helpers;
pub mod simulator;
pub mod types;

pub use error::{Error, Result};
