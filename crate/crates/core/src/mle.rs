//! Closed-form maximum likelihood for a known DAG.
//!
//! For each child `j` the weights `ŵ_{·,j}` solve `A_j ŵ = b_j`, where
//! `A_j = Σ_{k∈K_j} y_pa y_paᵀ` and `b_j = Σ_{k∈K_j} y_pa y_j` are scatter
//! sums of the centered rows. Then `σ̂_j² = S_j / N_j` and
//! `m̂_j = mean_{K_j}(x_j - Σ_i ŵ_ij x_i)`.

use thiserror::Error;

use crate::graph::{DagStructure, ParamId};
use crate::likelihood::{center, node_residual, CenteredData};
use crate::linalg::{min_norm_solve, Cholesky, Matrix};
use crate::sampler::Dataset;
use crate::scalar::{ln_two_pi, Scalar};

/// Null-space components below this magnitude do not mark an edge as
/// unidentified.
const NULL_COMPONENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MleError {
    #[error("dataset has {got} columns, graph has {expected} nodes")]
    Width { got: usize, expected: usize },
    #[error("{}", describe_issues(.0))]
    NotIdentified(Vec<NodeIssue>),
    #[error("node {} is clamped in every row: its parameters are unidentifiable", .0 + 1)]
    Unidentifiable(usize),
    #[error("scatter matrix is singular (pivot {} below tolerance)", .0 + 1)]
    SingularScatter(usize),
    #[error("dataset contains intervention rows; the full-model identity needs observational data")]
    NotObservational,
}

fn describe_issues(issues: &[NodeIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Why a node's parameters could not be estimated.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeIssue {
    /// `N_j = 0`: the node is clamped in every row.
    Unidentifiable { node: usize, params: Vec<ParamId> },
    /// `A_j` is singular: the design gives no insight on some weights.
    DegenerateSystem {
        node: usize,
        edges: Vec<(usize, usize)>,
        params: Vec<ParamId>,
    },
}

impl NodeIssue {
    pub fn node(&self) -> usize {
        match self {
            NodeIssue::Unidentifiable { node, .. } | NodeIssue::DegenerateSystem { node, .. } => *node,
        }
    }

    /// Parameters left without an estimate.
    pub fn params(&self) -> &[ParamId] {
        match self {
            NodeIssue::Unidentifiable { params, .. } | NodeIssue::DegenerateSystem { params, .. } => params,
        }
    }
}

impl std::fmt::Display for NodeIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names = self
            .params()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        match self {
            NodeIssue::Unidentifiable { node, .. } => write!(
                f,
                "node {} is clamped in every row; unidentified: {names}",
                node + 1
            ),
            NodeIssue::DegenerateSystem { node, .. } => write!(
                f,
                "degenerate linear system at node {}; unidentified: {names}",
                node + 1
            ),
        }
    }
}

/// Non-fatal conditions met while fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// `N_j ≤ |pa(j)| + 1`: the residuals can be fitted exactly and `σ̂_j`
    /// may be zero.
    ZeroVariance { node: usize, n_j: usize },
    /// A degenerate system was resolved by its minimum-norm solution.
    LeastSquares { node: usize, edges: Vec<(usize, usize)> },
}

impl std::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWarning::ZeroVariance { node, n_j } => write!(
                f,
                "node {} has only {n_j} informative rows; sigma estimate may be zero",
                node + 1
            ),
            FitWarning::LeastSquares { node, edges } => {
                let e = edges
                    .iter()
                    .map(|(i, j)| format!("w{},{}", i + 1, j + 1))
                    .collect::<Vec<_>>()
                    .join(", ");
                write!(
                    f,
                    "node {}: minimum-norm solution used; not identified: {e}",
                    node + 1
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Resolve singular systems with the minimum-norm solution instead of failing.
    pub least_squares: bool,
    /// Report `σ̂_j² · N_j / (N_j - 1)` instead of the maximum-likelihood value.
    pub bias_correct: bool,
}

/// Scatter sums for one child node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScatter<T> {
    /// `(Y_{i,i'})` over the parents of `j`.
    pub a: Matrix<T>,
    /// `(Y_{i,j})` over the parents of `j`.
    pub b: Vec<T>,
    pub yjj: T,
    pub n: usize,
}

/// Per-node scatter sums over `K_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrices<T> {
    pub nodes: Vec<NodeScatter<T>>,
}

impl<T: Scalar> ScatterMatrices<T> {
    pub fn new(dag: &DagStructure, cdata: &CenteredData<T>) -> Self {
        let nodes = (0..dag.p())
            .map(|j| {
                let pa = dag.parents_of(j);
                let y = cdata.y(j);
                let mut a = Matrix::zeros(pa.len(), pa.len());
                let mut b = vec![T::zero(); pa.len()];
                let mut yjj = T::zero();
                for r in 0..y.rows() {
                    let row = y.row(r);
                    yjj = yjj + row[j] * row[j];
                    for (u, &i) in pa.iter().enumerate() {
                        b[u] = b[u] + row[i] * row[j];
                        for (v, &i2) in pa.iter().enumerate().take(u + 1) {
                            a[(u, v)] = a[(u, v)] + row[i] * row[i2];
                        }
                    }
                }
                for u in 0..pa.len() {
                    for v in 0..u {
                        a[(v, u)] = a[(u, v)];
                    }
                }
                NodeScatter {
                    a,
                    b,
                    yjj,
                    n: cdata.n_j(j),
                }
            })
            .collect();
        Self { nodes }
    }
}

/// Which parameters received an estimate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identifiability {
    pub m: Vec<bool>,
    pub sigma: Vec<bool>,
    /// Aligned with the DAG's edges.
    pub w: Vec<bool>,
}

impl Identifiability {
    pub fn all(&self) -> bool {
        self.m.iter().chain(&self.sigma).chain(&self.w).all(|&b| b)
    }
}

/// Estimates; entries without an estimate are NaN and flagged in
/// `identifiability`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub m_hat: Vec<T>,
    pub sigma_hat: Vec<T>,
    /// Aligned with the DAG's edges.
    pub w_hat: Vec<T>,
    /// Log-likelihood at the maximum-likelihood estimate (before any bias
    /// correction of `σ̂`), summed over the nodes that could be fitted.
    pub loglik_at_max: T,
    pub identifiability: Identifiability,
    pub counts: Vec<usize>,
    pub issues: Vec<NodeIssue>,
    pub warnings: Vec<FitWarning>,
    pub bias_corrected: bool,
}

impl<T: Scalar> FitResult<T> {
    /// `(ŵ, σ̂)` in canonical parameter order.
    pub fn theta(&self) -> Vec<T> {
        self.w_hat.iter().chain(&self.sigma_hat).copied().collect()
    }
}

/// Fits every node; fails with [`MleError::NotIdentified`] if any node
/// could not be estimated.
pub fn fit<T: Scalar>(dag: &DagStructure, data: &Dataset<T>, opts: FitOptions) -> Result<FitResult<T>, MleError> {
    let res = fit_partial(dag, data, opts)?;
    if res.issues.is_empty() {
        Ok(res)
    } else {
        Err(MleError::NotIdentified(res.issues))
    }
}

/// Fits every node that can be fitted and records the others in `issues`.
pub fn fit_partial<T: Scalar>(
    dag: &DagStructure,
    data: &Dataset<T>,
    opts: FitOptions,
) -> Result<FitResult<T>, MleError> {
    check_width(dag, data)?;
    let cdata = center(data);
    let scatter = ScatterMatrices::new(dag, &cdata);
    let p = dag.p();
    let nan = T::nan();
    let mut m_hat = vec![nan; p];
    let mut sigma_hat = vec![nan; p];
    let mut w_hat = vec![nan; dag.num_edges()];
    let mut ident = Identifiability {
        m: vec![false; p],
        sigma: vec![false; p],
        w: vec![false; dag.num_edges()],
    };
    let mut issues = Vec::new();
    let mut warnings = Vec::new();
    let mut ll = T::zero();
    let half = T::lit(0.5);

    for j in 0..p {
        let node = &scatter.nodes[j];
        let n_j = node.n;
        let pa = dag.parents_of(j);
        let edges = dag.incoming(j);
        let node_params = || {
            edges
                .clone()
                .map(|e| ParamId::Weight {
                    parent: dag.edges()[e].parent,
                    child: j,
                })
                .chain([ParamId::Intercept(j), ParamId::Sigma(j)])
                .collect::<Vec<_>>()
        };
        if n_j == 0 {
            issues.push(NodeIssue::Unidentifiable {
                node: j,
                params: node_params(),
            });
            continue;
        }

        let mut unidentified: Vec<usize> = Vec::new();
        let w_j: Vec<T> = if pa.is_empty() {
            Vec::new()
        } else {
            match Cholesky::factor(&node.a) {
                Ok(ch) => ch.solve(&node.b),
                Err(_) => {
                    let (x, null) = min_norm_solve(&node.a, &node.b);
                    let tol = T::lit(NULL_COMPONENT_TOL);
                    let bad: Vec<usize> = (0..pa.len())
                        .filter(|&u| null.iter().any(|v| v[u].abs() > tol))
                        .collect();
                    let bad_edges: Vec<(usize, usize)> = bad.iter().map(|&u| (pa[u], j)).collect();
                    if !opts.least_squares {
                        let params = bad_edges
                            .iter()
                            .map(|&(i, j)| ParamId::Weight { parent: i, child: j })
                            .chain([ParamId::Intercept(j), ParamId::Sigma(j)])
                            .collect();
                        issues.push(NodeIssue::DegenerateSystem {
                            node: j,
                            edges: bad_edges,
                            params,
                        });
                        continue;
                    }
                    unidentified = bad;
                    warnings.push(FitWarning::LeastSquares {
                        node: j,
                        edges: bad_edges,
                    });
                    x
                }
            }
        };
        for (u, e) in edges.clone().enumerate() {
            w_hat[e] = w_j[u];
            ident.w[e] = !unidentified.contains(&u);
        }

        let y = cdata.y(j);
        let s_j: T = (0..y.rows())
            .map(|r| {
                let res = node_residual(dag, &w_hat, y.row(r), j);
                res * res
            })
            .sum();
        let nj = T::count(n_j);
        let var = s_j / nj;
        let mean = cdata.means(j);
        m_hat[j] = node_residual(dag, &w_hat, mean, j);
        ident.m[j] = unidentified.is_empty();
        ident.sigma[j] = true;

        ll = ll - half * ln_two_pi::<T>() * nj - half * nj * var.ln();
        ll = if var > T::zero() { ll - half * s_j / var } else { ll };

        sigma_hat[j] = if opts.bias_correct && n_j > 1 {
            (var * nj / (nj - T::one())).sqrt()
        } else {
            var.sqrt()
        };
        if n_j <= pa.len() + 1 {
            warnings.push(FitWarning::ZeroVariance { node: j, n_j });
        }
    }

    let degenerate = issues
        .iter()
        .any(|i| matches!(i, NodeIssue::DegenerateSystem { .. }));
    Ok(FitResult {
        m_hat,
        sigma_hat,
        w_hat,
        loglik_at_max: if degenerate { T::nan() } else { ll },
        identifiability: ident,
        counts: cdata.counts(),
        issues,
        warnings,
        bias_corrected: opts.bias_correct,
    })
}

fn check_width<T: Scalar>(dag: &DagStructure, data: &Dataset<T>) -> Result<(), MleError> {
    if data.p() == dag.p() {
        Ok(())
    } else {
        Err(MleError::Width {
            got: data.p(),
            expected: dag.p(),
        })
    }
}

/// `m̂_j(w) = mean_{K_j}(x_j - Σ_i w_ij x_i)`.
pub fn profile_m<T: Scalar>(dag: &DagStructure, w: &[T], data: &Dataset<T>) -> Result<Vec<T>, MleError> {
    check_width(dag, data)?;
    assert_eq!(w.len(), dag.num_edges(), "one weight per edge");
    (0..dag.p())
        .map(|j| {
            let ks = data.unclamped_rows(j);
            if ks.is_empty() {
                return Err(MleError::Unidentifiable(j));
            }
            let sum: T = ks.iter().map(|&k| node_residual(dag, w, data.row(k), j)).sum();
            Ok(sum / T::count(ks.len()))
        })
        .collect()
}

/// Maximized log-likelihood of the complete DAG on observational data:
/// `(Np/2)(log N - log 2π - 1) - (N/2) log det A`, with `A` the full
/// scatter matrix of the centered data. The determinant does not depend on
/// the column order, so neither does the value.
pub fn max_loglik_full<T: Scalar>(data: &Dataset<T>) -> Result<T, MleError> {
    if !data.is_observational() {
        return Err(MleError::NotObservational);
    }
    let a = full_scatter(data);
    let ch = Cholesky::factor(&a).map_err(|e| MleError::SingularScatter(e.index))?;
    let n = T::count(data.n());
    let p = T::count(data.p());
    let half = T::lit(0.5);
    Ok(half * n * p * (n.ln() - ln_two_pi::<T>() - T::one()) - half * n * ch.log_det())
}

/// `A = Σ_k y^kᵀ y^k` over all columns of column-centered data.
pub fn full_scatter<T: Scalar>(data: &Dataset<T>) -> Matrix<T> {
    let y = crate::likelihood::center_observational(data.x());
    y.transpose().matmul(&y)
}
