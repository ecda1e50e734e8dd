//! Gaussian Bayesian networks with known structure under mixtures of
//! observational and intervention (do-operator) data: exact likelihood,
//! closed-form maximum-likelihood estimation, expected Fisher information,
//! Cramér–Rao bounds and a Monte Carlo harness that checks one against the
//! other.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, with `*32` variants for `f32`.

// Index loops mirror the matrix algebra; `!(x > 0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod fisher;
pub mod graph;
pub mod likelihood;
pub mod linalg;
pub mod mle;
pub mod model;
pub mod montecarlo;
pub mod sampler;
pub mod scalar;

#[cfg(test)]
pub(crate) mod testutil;

pub use fisher::{
    cramer_rao, design_score, fisher_intervention, fisher_observational, Criterion, FisherError,
};
pub use graph::{DagStructure, Edge, GraphError, ParamId};
pub use likelihood::{center, gradient, hessian, loglik, profiled_loglik, LikelihoodError};
pub use linalg::Matrix;
pub use mle::{fit, fit_partial, max_loglik_full, profile_m, FitOptions, MleError};
pub use model::{joint_distribution, mutilate, path_matrix, weight_matrix, InterventionTarget, ModelError};
pub use montecarlo::{run_mc, McError};
pub use sampler::{sample, Condition, DataError};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type GbnParams = model::GbnParams<f64>;
pub type JointGaussian = model::JointGaussian<f64>;
pub type Target = model::InterventionTarget<f64>;
pub type DesignSpec = sampler::DesignSpec<f64>;
pub type Dataset = sampler::Dataset<f64>;
pub type CenteredData = likelihood::CenteredData<f64>;
pub type FitResult = mle::FitResult<f64>;
pub type FisherMatrix = fisher::FisherMatrix<f64>;
pub type CramerRao = fisher::CramerRao<f64>;
pub type McReport = montecarlo::McReport<f64>;

pub type Matrix32 = linalg::Matrix<f32>;
pub type GbnParams32 = model::GbnParams<f32>;
pub type DesignSpec32 = sampler::DesignSpec<f32>;
pub type Dataset32 = sampler::Dataset<f32>;
pub type FitResult32 = mle::FitResult<f32>;
pub type FisherMatrix32 = fisher::FisherMatrix<f32>;
