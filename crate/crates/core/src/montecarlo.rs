//! Replicated simulate-and-fit runs for checking the estimator against its
//! Cramér–Rao bound.
//!
//! Replicate `r` draws from a ChaCha20 generator seeded with the master
//! seed and switched to stream `r` (`set_stream(r)`), so replicates are
//! independent of each other and of how they are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::ParamId;
use crate::linalg::Matrix;
use crate::mle::{fit, FitOptions};
use crate::model::GbnParams;
use crate::sampler::{sample_with_rng, DataError, DesignSpec};
use crate::scalar::Scalar;

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("need at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("all {0} replicates failed to fit")]
    AllReplicatesFailed(usize),
    #[error("{failures} of {reps} replicates failed to fit (limit {:.0}%)", MAX_FAILURE_FRACTION * 100.0)]
    TooManyFailures { failures: usize, reps: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Moments of `θ̂ = (ŵ, σ̂)` over the successful replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport<T> {
    pub params_order: Vec<ParamId>,
    pub reps: usize,
    pub estimator_mean: Vec<T>,
    pub estimator_sd: Vec<T>,
    /// Unbiased sample covariance.
    pub estimator_cov: Matrix<T>,
    pub failures: usize,
    pub seed: u64,
}

/// Generator for replicate `index` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `reps` datasets from `design`, fits each and summarizes the
/// estimates. Runs on the current rayon pool; output does not depend on
/// the thread count.
pub fn run_mc<T: Scalar>(
    params: &GbnParams<T>,
    design: &DesignSpec<T>,
    reps: usize,
    seed: u64,
) -> Result<McReport<T>, McError> {
    if reps < 2 {
        return Err(McError::TooFewReplicates(reps));
    }
    design.validate(params.p())?;
    let dag = params.dag();
    let estimates: Vec<Option<Vec<T>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let data = sample_with_rng(params, design, &mut rng).ok()?;
            fit(dag, &data, FitOptions::default()).ok().map(|f| f.theta())
        })
        .collect();

    let ok: Vec<&Vec<T>> = estimates.iter().flatten().collect();
    let failures = reps - ok.len();
    if ok.is_empty() {
        return Err(McError::AllReplicatesFailed(reps));
    }
    if failures as f64 > MAX_FAILURE_FRACTION * reps as f64 {
        return Err(McError::TooManyFailures { failures, reps });
    }
    let (mean, cov) = sample_moments(&ok);
    let sd = cov.diagonal().into_iter().map(|v| v.sqrt()).collect();
    Ok(McReport {
        params_order: dag.param_order(),
        reps,
        estimator_mean: mean,
        estimator_sd: sd,
        estimator_cov: cov,
        failures,
        seed,
    })
}

/// Mean and unbiased covariance, accumulated in index order.
pub fn sample_moments<T: Scalar, V: AsRef<[T]>>(rows: &[V]) -> (Vec<T>, Matrix<T>) {
    let n = rows.len();
    let k = rows.first().map_or(0, |r| r.as_ref().len());
    let mut mean = vec![T::zero(); k];
    for r in rows {
        for (m, &v) in mean.iter_mut().zip(r.as_ref()) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / T::count(n));
    let mut cov = Matrix::zeros(k, k);
    for r in rows {
        let d: Vec<T> = r.as_ref().iter().zip(&mean).map(|(&v, &m)| v - m).collect();
        for a in 0..k {
            for b in 0..=a {
                cov[(a, b)] = cov[(a, b)] + d[a] * d[b];
            }
        }
    }
    let denom = if n > 1 { T::count(n - 1) } else { T::one() };
    for a in 0..k {
        for b in 0..=a {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}
