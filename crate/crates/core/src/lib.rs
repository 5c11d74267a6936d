//! Robust principal components from depth-based multivariate ranks.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkernel`]: dense symmetric linear algebra and special functions.
//! - [`model`]: elliptical generative models and standardized Monte-Carlo panels.
//! - [`depth`]: halfspace, Mahalanobis and projection depth (sample and population).
//! - [`ranks`]: spatial signs, the depth-based rank transform, the spatial median.
//! - [`scatter`]: sample covariance, SCM, DCM, Tyler and depth-weighted Tyler,
//!   plus recovery of standardized shape eigenvalues.
//! - [`asymptotics`]: influence functions, the asymptotic covariance of the sample
//!   DCM and eigenvector efficiencies.
//! - [`simulation`]: elliptical samplers and the finite-sample efficiency harness.
//! - [`diagnostics`]: score/orthogonal distances and outlier cutoffs.
//!
//! Data-parallel loops go through [`Execution`]; with the `parallel` feature
//! (default) they run on rayon, otherwise sequentially. Reductions always happen
//! in index order, so results do not depend on the schedule.

pub mod asymptotics;
pub mod depth;
pub mod diagnostics;
mod error;
mod exec;
mod mc;
pub mod model;
pub mod numkernel;
pub mod ranks;
pub mod scatter;
pub mod simulation;
mod stats;

pub use error::{Error, Result};
pub use exec::{substream_seed, Execution};
pub use stats::{mad, median, quantile_type7};
