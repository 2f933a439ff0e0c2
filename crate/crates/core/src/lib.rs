//! Learning mixtures of spherical Gaussians in `d` dimensions, and general
//! Gaussian mixtures on the line, to small L1 error.
//!
//! The `d`-dimensional pipeline estimates a shared variance, clusters the
//! samples by single-linkage and recursive spectral splitting, grids the span
//! of each cluster's top eigenvectors, and picks a candidate mixture with a
//! Scheffe tournament. Everything is generic over [`Scalar`] (`f32` or `f64`).

pub mod cluster;
pub mod distance;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
mod quad;
pub mod rng;
pub mod scalar;
pub mod scheffe;

pub use cluster::{Clustering, Thresholds};
pub use distance::{l1_mc, l1_quadrature_1d, L1Estimate};
pub use error::{Error, Result};
pub use estimator::{learn_1d, learn_k_sphere, EstimatorConfig, Report};
pub use linalg::{EigenOptions, Matrix};
pub use model::{Component, Dataset, Density, Mixture};
pub use scalar::Scalar;
pub use scheffe::{modified_scheffe, CandidateFamily, TournamentOptions, TournamentOutcome};

pub type Mixture64 = Mixture<f64>;
pub type Mixture32 = Mixture<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type EstimatorConfig64 = EstimatorConfig<f64>;
pub type EstimatorConfig32 = EstimatorConfig<f32>;
