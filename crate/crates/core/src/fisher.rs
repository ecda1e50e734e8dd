//! Expected Fisher information of the profile likelihood `ℓ̃(σ, w)`,
//! Cramér–Rao bounds and information-based design scores.
//!
//! Under a design, row `k` follows the mutilated law `N(μ_k, Σ_k)` of its
//! condition, and the centered row `y^{k,j}` has mean
//! `m^{k,j} = μ_k - mean_{K_j}(μ)` and covariance
//! `S^{k,j} = ((N_j-1)/N_j)² Σ_k + N_j⁻² Σ_{k'∈K_j, k'≠k} Σ_{k'}`.
//! Summing `S^{k,j}` over `K_j` gives `((N_j-1)/N_j) Σ_{k∈K_j} Σ_k`, hence
//!
//! ```text
//! I[w_ij, w_i'j] = σ_j⁻² ( (N_j-1)/N_j Σ_{k∈K_j} Σ_k[i,i'] + Σ_{k∈K_j} m^{k,j}_i m^{k,j}_i' )
//! I[σ_j, σ_j]    = (2 N_j - 3) / σ_j²
//! ```
//!
//! with all `w`–`σ` entries and all entries across different children zero.

use thiserror::Error;

use crate::graph::{DagStructure, ParamId};
use crate::linalg::{Cholesky, Matrix};
use crate::model::{joint_distribution, mutilate, GbnParams, ModelError};
use crate::sampler::{DataError, DesignSpec};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FisherError {
    #[error("node {} has N_j = {n_j} informative rows; at least 2 are needed", .node + 1)]
    InsufficientReplication { node: usize, n_j: usize },
    #[error("information matrix is singular at parameter {param}; the design does not identify it")]
    SingularInformation { param: ParamId },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Information matrix over the canonical `(w, σ)` parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<T> {
    pub params_order: Vec<ParamId>,
    pub info: Matrix<T>,
}

/// Moments of the centered rows, per condition and node.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMoments<T> {
    /// `moments[c][j]` is `None` when node `j` is clamped under condition `c`.
    pub moments: Vec<Vec<Option<RowMoments<T>>>>,
    /// Mutilated mean of each condition.
    pub mu: Vec<Vec<T>>,
    /// Mutilated covariance of each condition.
    pub sigma: Vec<Matrix<T>>,
}

/// Mean `m^{k,j}` and covariance `S^{k,j}` of one centered row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMoments<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

/// Per-condition mutilated moments and the centered-row moments they imply.
pub fn centered_moments<T: Scalar>(
    params: &GbnParams<T>,
    design: &DesignSpec<T>,
) -> Result<CenteredMoments<T>, FisherError> {
    let p = params.p();
    design.validate(p)?;
    let conds = design.conditions();
    let mut mu = Vec::with_capacity(conds.len());
    let mut sigma = Vec::with_capacity(conds.len());
    for c in conds {
        let mm = mutilate(params, &c.target)?;
        mu.push(mm.mu_j);
        sigma.push(mm.cov_j);
    }
    let counts = design.unclamped_counts(p);
    let mut moments = vec![vec![None; p]; conds.len()];
    for j in 0..p {
        let n_j = counts[j];
        if n_j == 0 {
            continue;
        }
        let nj = T::count(n_j);
        let free: Vec<usize> = (0..conds.len())
            .filter(|&c| !conds[c].target.is_clamped(j))
            .collect();
        let mut mean_bar = vec![T::zero(); p];
        let mut sigma_total = Matrix::zeros(p, p);
        for &c in &free {
            let r = T::count(conds[c].reps);
            for (mb, &m) in mean_bar.iter_mut().zip(&mu[c]) {
                *mb = *mb + r * m;
            }
            sigma_total = add(&sigma_total, &sigma[c].scale(r));
        }
        mean_bar.iter_mut().for_each(|m| *m = *m / nj);
        let own = (nj - T::one()) / nj;
        let own = own * own;
        let inv_n2 = T::one() / (nj * nj);
        for &c in &free {
            let mean = mu[c].iter().zip(&mean_bar).map(|(&a, &b)| a - b).collect();
            let others = sigma_total.sub(&sigma[c]);
            let cov = add(&sigma[c].scale(own), &others.scale(inv_n2));
            moments[c][j] = Some(RowMoments { mean, cov });
        }
    }
    Ok(CenteredMoments { moments, mu, sigma })
}

fn add<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    a.sub(&b.scale(-T::one()))
}

/// `(edge a, parent i, edge b, parent i')` over the edges into `j`, with
/// `b <= a`.
fn parent_pairs(dag: &DagStructure, j: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
    let start = dag.incoming(j).start;
    let pa = dag.parents_of(j);
    (0..pa.len()).flat_map(move |u| (0..=u).map(move |v| (start + u, pa[u], start + v, pa[v])))
}

/// Information for `n` observational rows:
/// `(N-1) Σ[i,i'] / σ_j²` on the weight block of child `j`,
/// `(2N-3)/σ_j²` on the `σ` diagonal.
pub fn fisher_observational<T: Scalar>(params: &GbnParams<T>, n: usize) -> Result<FisherMatrix<T>, FisherError> {
    if n < 2 {
        return Err(FisherError::InsufficientReplication { node: 0, n_j: n });
    }
    let joint = joint_distribution(params);
    let dag = params.dag();
    let k = dag.num_params();
    let mut info = Matrix::zeros(k, k);
    let nm1 = T::count(n - 1);
    for j in 0..dag.p() {
        let s2 = params.sigma()[j] * params.sigma()[j];
        for (a, i, b, i2) in parent_pairs(dag, j) {
            let v = nm1 * joint.cov[(i, i2)] / s2;
            info[(a, b)] = v;
            info[(b, a)] = v;
        }
        let sj = dag.num_edges() + j;
        info[(sj, sj)] = (T::count(2 * n) - T::lit(3.0)) / s2;
    }
    Ok(FisherMatrix {
        params_order: dag.param_order(),
        info,
    })
}

/// Information for an arbitrary design. Nodes clamped in every row carry
/// no information (zero rows); nodes free in exactly one row are rejected,
/// since `2N_j - 3` would be negative.
pub fn fisher_intervention<T: Scalar>(
    params: &GbnParams<T>,
    design: &DesignSpec<T>,
) -> Result<FisherMatrix<T>, FisherError> {
    let p = params.p();
    design.validate(p)?;
    let counts = design.unclamped_counts(p);
    if let Some(node) = (0..p).find(|&j| counts[j] == 1) {
        return Err(FisherError::InsufficientReplication { node, n_j: 1 });
    }
    let conds = design.conditions();
    let mut mu = Vec::with_capacity(conds.len());
    let mut sigma = Vec::with_capacity(conds.len());
    for c in conds {
        let mm = mutilate(params, &c.target)?;
        mu.push(mm.mu_j);
        sigma.push(mm.cov_j);
    }

    let dag = params.dag();
    let k = dag.num_params();
    let mut info = Matrix::zeros(k, k);
    for j in 0..p {
        let n_j = counts[j];
        if n_j == 0 {
            continue;
        }
        let nj = T::count(n_j);
        let s2 = params.sigma()[j] * params.sigma()[j];
        let free: Vec<usize> = (0..conds.len())
            .filter(|&c| !conds[c].target.is_clamped(j))
            .collect();
        let mut mean_bar = vec![T::zero(); p];
        for &c in &free {
            let r = T::count(conds[c].reps);
            for (mb, &m) in mean_bar.iter_mut().zip(&mu[c]) {
                *mb = *mb + r * m;
            }
        }
        mean_bar.iter_mut().for_each(|m| *m = *m / nj);
        let coef = (nj - T::one()) / nj;
        for (a, i, b, i2) in parent_pairs(dag, j) {
            let mut cov_sum = T::zero();
            let mut offset = T::zero();
            for &c in &free {
                let r = T::count(conds[c].reps);
                cov_sum = cov_sum + r * sigma[c][(i, i2)];
                offset = offset + r * (mu[c][i] - mean_bar[i]) * (mu[c][i2] - mean_bar[i2]);
            }
            let v = (coef * cov_sum + offset) / s2;
            info[(a, b)] = v;
            info[(b, a)] = v;
        }
        let sj = dag.num_edges() + j;
        info[(sj, sj)] = (T::count(2 * n_j) - T::lit(3.0)) / s2;
    }
    Ok(FisherMatrix {
        params_order: dag.param_order(),
        info,
    })
}

/// Inverse information and the standard deviations it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct CramerRao<T> {
    pub cov: Matrix<T>,
    pub sd: Vec<T>,
}

pub fn cramer_rao<T: Scalar>(fisher: &FisherMatrix<T>) -> Result<CramerRao<T>, FisherError> {
    let ch = factor(fisher)?;
    let cov = ch.inverse();
    let sd = cov.diagonal().into_iter().map(|v| v.sqrt()).collect();
    Ok(CramerRao { cov, sd })
}

fn factor<T: Scalar>(fisher: &FisherMatrix<T>) -> Result<Cholesky<T>, FisherError> {
    Cholesky::factor(&fisher.info).map_err(|e| FisherError::SingularInformation {
        param: fisher.params_order[e.index],
    })
}

/// Optimality criterion for [`design_score`]; larger scores are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `log det I`.
    DOptimal,
    /// `-trace(I⁻¹)`.
    AOptimal,
}

impl std::str::FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "d-opt" => Ok(Criterion::DOptimal),
            "a-opt" => Ok(Criterion::AOptimal),
            other => Err(format!("unknown criterion `{other}` (expected d-opt or a-opt)")),
        }
    }
}

pub fn design_score<T: Scalar>(
    params: &GbnParams<T>,
    design: &DesignSpec<T>,
    criterion: Criterion,
) -> Result<T, FisherError> {
    let fisher = fisher_intervention(params, design)?;
    score(&fisher, criterion)
}

/// Scores an already computed information matrix.
pub fn score<T: Scalar>(fisher: &FisherMatrix<T>, criterion: Criterion) -> Result<T, FisherError> {
    let ch = factor(fisher)?;
    Ok(match criterion {
        Criterion::DOptimal => ch.log_det(),
        Criterion::AOptimal => -ch.inverse().trace(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InterventionTarget;
    use crate::sampler::Condition;
    use crate::testutil::{five_condition_design, toy_params};

    #[test]
    fn single_node_two_rows() {
        let dag = crate::graph::DagStructure::new(1, &[]).unwrap();
        let params = GbnParams::new(dag, vec![0.0], vec![1.0], vec![]).unwrap();
        let f = fisher_observational(&params, 2).unwrap();
        assert_eq!(f.info, Matrix::from_rows(&[[1.0]]));
    }

    #[test]
    fn diagonal_bound() {
        let f = FisherMatrix {
            params_order: vec![ParamId::Sigma(0), ParamId::Sigma(1)],
            info: Matrix::from_diagonal(&[4.0f64, 25.0]),
        };
        let cr = cramer_rao(&f).unwrap();
        assert!((cr.sd[0] - 0.5).abs() < 1e-15 && (cr.sd[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn summed_row_moments_match_condensed_formula() {
        let params = toy_params::<f64>();
        let design = five_condition_design(40);
        let moments = centered_moments(&params, &design).unwrap();
        let fisher = fisher_intervention(&params, &design).unwrap();
        let dag = params.dag();
        for j in 0..3 {
            let s2 = params.sigma()[j].powi(2);
            for (a, &i) in dag.incoming(j).zip(dag.parents_of(j)) {
                for (b, &i2) in dag.incoming(j).zip(dag.parents_of(j)) {
                    let mut sum = 0.0;
                    for (c, cond) in design.conditions().iter().enumerate() {
                        if let Some(rm) = &moments.moments[c][j] {
                            sum += cond.reps as f64 * (rm.cov[(i, i2)] + rm.mean[i] * rm.mean[i2]);
                        }
                    }
                    let direct = fisher.info[(a, b)];
                    assert!((sum / s2 - direct).abs() < 1e-10 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn observational_design_reduces() {
        let params = toy_params::<f64>();
        let a = fisher_observational(&params, 37).unwrap();
        let b = fisher_intervention(&params, &DesignSpec::observational(37).unwrap()).unwrap();
        assert!(a.info.max_abs_diff(&b.info) < 1e-10);
    }

    #[test]
    fn single_free_row_is_rejected() {
        let params = toy_params::<f64>();
        let design = DesignSpec::new(vec![
            Condition {
                target: InterventionTarget::new([(0, 1.0)]),
                reps: 10,
            },
            Condition {
                target: InterventionTarget::observational(),
                reps: 1,
            },
        ])
        .unwrap();
        assert_eq!(
            fisher_intervention(&params, &design),
            Err(FisherError::InsufficientReplication { node: 0, n_j: 1 })
        );
        assert!(fisher_observational(&params, 1).is_err());
    }

    #[test]
    fn clamped_everywhere_is_singular() {
        let params = toy_params::<f64>();
        let design = DesignSpec::new(vec![Condition {
            target: InterventionTarget::new([(0, 0.5)]),
            reps: 50,
        }])
        .unwrap();
        let err = design_score(&params, &design, Criterion::DOptimal).unwrap_err();
        assert!(matches!(err, FisherError::SingularInformation { .. }));
    }
}
