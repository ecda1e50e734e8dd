//! Gaussian Bayesian network parameters and their exact Gaussian algebra.
//!
//! Each node follows `X_j = m_j + Σ_{i ∈ pa(j)} w_ij X_i + ε_j` with
//! independent `ε_j ~ N(0, σ_j²)`. Writing `W` for the weight matrix and
//! `L = (I - W)⁻¹`, the joint law is `N(m L, Lᵀ diag(σ²) L)` (row-vector
//! convention). An intervention `do(X_J = x_J)` cuts the edges into `J` and
//! makes those coordinates deterministic.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{DagStructure, GraphError};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{field} has length {got}, expected {expected}")]
    Length {
        field: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("sigma[{}] = {value} must be positive and finite", .node + 1)]
    NonPositiveSigma { node: usize, value: f64 },
    #[error("{field}[{}] is not finite", .index + 1)]
    NonFinite { field: &'static str, index: usize },
    #[error("weight given for ({},{}) which is not an edge of the graph", .0 + 1, .1 + 1)]
    UnknownEdge(usize, usize),
    #[error("no weight given for edge ({},{})", .0 + 1, .1 + 1)]
    MissingWeight(usize, usize),
    #[error("weight matrix has entry {value} at ({},{}) on or below the diagonal of the topological order", .row + 1, .col + 1)]
    NotTriangular { row: usize, col: usize, value: f64 },
    #[error("intervention targets node {}, graph has {p} nodes", .index + 1)]
    TargetOutOfRange { index: usize, p: usize },
}

/// Parameters `θ = (m, σ, w)` of a Gaussian Bayesian network.
#[derive(Debug, Clone, PartialEq)]
pub struct GbnParams<T> {
    dag: DagStructure,
    m: Vec<T>,
    sigma: Vec<T>,
    /// Edge weights aligned with `dag.edges()`.
    w: Vec<T>,
}

impl<T: Scalar> GbnParams<T> {
    /// `w` must be aligned with `dag.edges()` (canonical `(child, parent)` order).
    pub fn new(dag: DagStructure, m: Vec<T>, sigma: Vec<T>, w: Vec<T>) -> Result<Self, ModelError> {
        let p = dag.p();
        check_len("m", m.len(), p)?;
        check_len("sigma", sigma.len(), p)?;
        check_len("w", w.len(), dag.num_edges())?;
        check_finite("m", &m)?;
        check_finite("w", &w)?;
        for (node, &s) in sigma.iter().enumerate() {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(ModelError::NonPositiveSigma {
                    node,
                    value: s.as_f64(),
                });
            }
        }
        Ok(Self { dag, m, sigma, w })
    }

    /// Builds parameters from explicit `((parent, child), weight)` pairs,
    /// which must cover every edge exactly once.
    pub fn from_edge_weights(
        dag: DagStructure,
        m: Vec<T>,
        sigma: Vec<T>,
        weights: &[((usize, usize), T)],
    ) -> Result<Self, ModelError> {
        let mut w = vec![None; dag.num_edges()];
        for &((i, j), v) in weights {
            let k = dag.edge_index(i, j).ok_or(ModelError::UnknownEdge(i, j))?;
            w[k] = Some(v);
        }
        let w = w
            .into_iter()
            .zip(dag.edges())
            .map(|(v, e)| v.ok_or(ModelError::MissingWeight(e.parent, e.child)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dag, m, sigma, w)
    }

    pub fn dag(&self) -> &DagStructure {
        &self.dag
    }

    pub fn p(&self) -> usize {
        self.dag.p()
    }

    pub fn m(&self) -> &[T] {
        &self.m
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    /// Edge weights in canonical edge order.
    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn weight(&self, parent: usize, child: usize) -> Option<T> {
        self.dag.edge_index(parent, child).map(|k| self.w[k])
    }

    /// The `(w, σ)` vector in canonical parameter order.
    pub fn theta(&self) -> Vec<T> {
        self.w.iter().chain(&self.sigma).copied().collect()
    }

    pub fn with_m(mut self, m: Vec<T>) -> Result<Self, ModelError> {
        check_len("m", m.len(), self.p())?;
        check_finite("m", &m)?;
        self.m = m;
        Ok(self)
    }
}

fn check_len(field: &'static str, got: usize, expected: usize) -> Result<(), ModelError> {
    if got == expected {
        Ok(())
    } else {
        Err(ModelError::Length {
            field,
            got,
            expected,
        })
    }
}

fn check_finite<T: Scalar>(field: &'static str, v: &[T]) -> Result<(), ModelError> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(ModelError::NonFinite { field, index }),
        None => Ok(()),
    }
}

/// Mean vector and covariance of a (possibly degenerate) Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian<T> {
    pub mu: Vec<T>,
    pub cov: Matrix<T>,
}

/// A set of clamped nodes with their values; empty means observational.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterventionTarget<T> {
    targets: BTreeMap<usize, T>,
}

impl<T: Scalar> InterventionTarget<T> {
    pub fn observational() -> Self {
        Self {
            targets: BTreeMap::new(),
        }
    }

    /// Later entries override earlier ones for a repeated node.
    pub fn new<I: IntoIterator<Item = (usize, T)>>(pairs: I) -> Self {
        Self {
            targets: pairs.into_iter().collect(),
        }
    }

    pub fn is_observational(&self) -> bool {
        self.targets.is_empty()
    }

    #[inline]
    pub fn is_clamped(&self, node: usize) -> bool {
        self.targets.contains_key(&node)
    }

    #[inline]
    pub fn value(&self, node: usize) -> Option<T> {
        self.targets.get(&node).copied()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `(node, value)` pairs in ascending node order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.targets.iter().map(|(&k, &v)| (k, v))
    }

    pub fn validate(&self, p: usize) -> Result<(), ModelError> {
        match self.targets.keys().find(|&&k| k >= p) {
            Some(&index) => Err(ModelError::TargetOutOfRange { index, p }),
            None => Ok(()),
        }
    }
}

/// The post-intervention model of [`mutilate`].
#[derive(Debug, Clone)]
pub struct MutilatedModel<'a, T> {
    pub base: &'a GbnParams<T>,
    pub target: InterventionTarget<T>,
    /// `W` with the columns of clamped nodes zeroed.
    pub w_j: Matrix<T>,
    /// `(I - W_J)⁻¹`.
    pub l_j: Matrix<T>,
    /// 0/1 indicator of unclamped nodes.
    pub d_j: Vec<T>,
    /// Clamped value at `J`, intercept elsewhere.
    pub nu: Vec<T>,
    pub mu_j: Vec<T>,
    pub cov_j: Matrix<T>,
}

impl<T: Scalar> MutilatedModel<'_, T> {
    pub fn moments(&self) -> JointGaussian<T> {
        JointGaussian {
            mu: self.mu_j.clone(),
            cov: self.cov_j.clone(),
        }
    }
}

/// `W[i, j] = w_ij` on edges, zero elsewhere.
pub fn weight_matrix<T: Scalar>(params: &GbnParams<T>) -> Matrix<T> {
    let p = params.p();
    let mut w = Matrix::zeros(p, p);
    for (e, &v) in params.dag().edges().iter().zip(params.w()) {
        w[(e.parent, e.child)] = v;
    }
    w
}

const TRIANGULAR_TOL: f64 = 1e-14;

/// `L = (I - W)⁻¹` for `W` strictly upper triangular in index order.
pub fn path_matrix<T: Scalar>(w: &Matrix<T>) -> Result<Matrix<T>, ModelError> {
    let order: Vec<usize> = (0..w.rows()).collect();
    path_matrix_in_order(w, &order)
}

/// `L = (I - W)⁻¹` for `W` strictly upper triangular once rows and columns
/// are listed in `topo` order. Solved by back-substitution on
/// `L = I + W L`, filling rows from the last node of `topo` backwards.
pub fn path_matrix_in_order<T: Scalar>(w: &Matrix<T>, topo: &[usize]) -> Result<Matrix<T>, ModelError> {
    assert!(w.is_square() && topo.len() == w.rows());
    let p = w.rows();
    let mut pos = vec![0; p];
    for (k, &v) in topo.iter().enumerate() {
        pos[v] = k;
    }
    let tol = T::lit(TRIANGULAR_TOL);
    for row in 0..p {
        for col in 0..p {
            if pos[row] >= pos[col] && w[(row, col)].abs() > tol {
                return Err(ModelError::NotTriangular {
                    row,
                    col,
                    value: w[(row, col)].as_f64(),
                });
            }
        }
    }
    let mut l = Matrix::identity(p);
    for &a in topo.iter().rev() {
        let mut acc = vec![T::zero(); p];
        acc[a] = T::one();
        for &c in &topo[pos[a] + 1..] {
            let wac = w[(a, c)];
            if wac == T::zero() {
                continue;
            }
            for (x, &lc) in acc.iter_mut().zip(l.row(c)) {
                *x = *x + wac * lc;
            }
        }
        l.row_mut(a).copy_from_slice(&acc);
    }
    Ok(l)
}

/// `Lᵀ diag(v) L`, computed as `Σ_i v_i L[i,·]ᵀ L[i,·]`.
fn congruence<T: Scalar>(l: &Matrix<T>, v: &[T]) -> Matrix<T> {
    let p = l.rows();
    let mut cov = Matrix::zeros(p, p);
    for (i, &vi) in v.iter().enumerate() {
        if vi == T::zero() {
            continue;
        }
        let r = l.row(i);
        for a in 0..p {
            if r[a] == T::zero() {
                continue;
            }
            let s = vi * r[a];
            for b in 0..=a {
                cov[(a, b)] = cov[(a, b)] + s * r[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov
}

fn params_path_matrix<T: Scalar>(params: &GbnParams<T>, w: &Matrix<T>) -> Matrix<T> {
    // Edges respect the DAG order by construction.
    path_matrix_in_order(w, params.dag().topological()).expect("weights follow the DAG order")
}

/// `μ = m L`, `Σ = Lᵀ diag(σ²) L`.
pub fn joint_distribution<T: Scalar>(params: &GbnParams<T>) -> JointGaussian<T> {
    let w = weight_matrix(params);
    let l = params_path_matrix(params, &w);
    let var: Vec<T> = params.sigma().iter().map(|&s| s * s).collect();
    JointGaussian {
        mu: l.left_mul_vec(params.m()),
        cov: congruence(&l, &var),
    }
}

/// The intervened model under `do(X_J = x_J)`.
pub fn mutilate<'a, T: Scalar>(
    params: &'a GbnParams<T>,
    target: &InterventionTarget<T>,
) -> Result<MutilatedModel<'a, T>, ModelError> {
    let p = params.p();
    target.validate(p)?;
    let mut w_j = weight_matrix(params);
    for (j, _) in target.iter() {
        for i in 0..p {
            w_j[(i, j)] = T::zero();
        }
    }
    let l_j = params_path_matrix(params, &w_j);
    let d_j: Vec<T> = (0..p)
        .map(|j| if target.is_clamped(j) { T::zero() } else { T::one() })
        .collect();
    let nu: Vec<T> = (0..p)
        .map(|j| target.value(j).unwrap_or(params.m()[j]))
        .collect();
    let var: Vec<T> = params
        .sigma()
        .iter()
        .zip(&d_j)
        .map(|(&s, &d)| s * s * d)
        .collect();
    let mu_j = l_j.left_mul_vec(&nu);
    let mut cov_j = congruence(&l_j, &var);
    // Clamped coordinates are exact constants.
    for (j, _) in target.iter() {
        for k in 0..p {
            cov_j[(j, k)] = T::zero();
            cov_j[(k, j)] = T::zero();
        }
    }
    Ok(MutilatedModel {
        base: params,
        target: target.clone(),
        w_j,
        l_j,
        d_j,
        nu,
        mu_j,
        cov_j,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::toy_params;

    #[test]
    fn toy_weight_and_path_matrices() {
        let params = toy_params::<f64>();
        let w = weight_matrix(&params);
        let want_w = Matrix::from_rows(&[[0.0, -0.8, 0.9], [0.0, 0.0, 0.5], [0.0, 0.0, 0.0]]);
        assert_eq!(w, want_w);
        let l = path_matrix(&w).unwrap();
        let want_l = Matrix::from_rows(&[[1.0, -0.8, 0.5], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]]);
        assert!(l.max_abs_diff(&want_l) < 1e-15);
    }

    #[test]
    fn zero_weights_give_identity() {
        let w = Matrix::<f64>::zeros(4, 4);
        assert_eq!(path_matrix(&w).unwrap(), Matrix::identity(4));
    }

    #[test]
    fn rejects_lower_entries() {
        let mut w = Matrix::<f64>::zeros(3, 3);
        w[(2, 0)] = 0.3;
        assert!(matches!(
            path_matrix(&w),
            Err(ModelError::NotTriangular { row: 2, col: 0, .. })
        ));
        w[(2, 0)] = 0.0;
        w[(1, 1)] = 1e-13;
        assert!(path_matrix(&w).is_err());
        w[(1, 1)] = 1e-15;
        assert!(path_matrix(&w).is_ok());
    }

    #[test]
    fn toy_joint_distribution() {
        let j = joint_distribution(&toy_params::<f64>());
        for (a, b) in j.mu.iter().zip([0.5, 0.8, 1.55]) {
            assert!((a - b).abs() < 1e-14);
        }
        let want = Matrix::from_rows(&[
            [0.090, -0.072, 0.045],
            [-0.072, 1.2676, 0.569],
            [0.045, 0.569, 0.685],
        ]);
        assert!(j.cov.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn toy_joint_distribution_f32() {
        let j = joint_distribution(&toy_params::<f32>());
        assert!((j.mu[2] - 1.55).abs() < 1e-6);
        assert!((j.cov[(1, 1)] - 1.2676).abs() < 1e-5);
    }

    #[test]
    fn zero_weights_joint_is_independent() {
        let dag = DagStructure::from_one_based(3, &[(1, 2), (1, 3), (2, 3)]).unwrap();
        let params = GbnParams::new(dag, vec![1.0, 2.0, 3.0], vec![0.5, 1.0, 2.0], vec![0.0; 3]).unwrap();
        let j = joint_distribution(&params);
        assert_eq!(j.mu, vec![1.0, 2.0, 3.0]);
        assert_eq!(j.cov, Matrix::from_diagonal(&[0.25, 1.0, 4.0]));
    }

    #[test]
    fn mutilate_node_one() {
        let params = toy_params::<f64>();
        let mm = mutilate(&params, &InterventionTarget::new([(0, -0.5)])).unwrap();
        for (a, b) in mm.mu_j.iter().zip([-0.5, 1.6, 1.05]) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        let c = &mm.cov_j;
        for k in 0..3 {
            assert_eq!(c[(0, k)], 0.0);
            assert_eq!(c[(k, 0)], 0.0);
        }
        assert!((c[(1, 1)] - 1.21).abs() < 1e-14);
        assert!((c[(1, 2)] - 0.605).abs() < 1e-14);
        assert!((c[(2, 2)] - 0.6625).abs() < 1e-14);
    }

    #[test]
    fn mutilate_empty_and_full() {
        let params = toy_params::<f64>();
        let joint = joint_distribution(&params);
        let mm = mutilate(&params, &InterventionTarget::observational()).unwrap();
        assert_eq!(mm.mu_j, joint.mu);
        assert_eq!(mm.cov_j, joint.cov);

        let all = InterventionTarget::new([(0, 1.0), (1, -2.0), (2, 3.5)]);
        let mm = mutilate(&params, &all).unwrap();
        assert_eq!(mm.mu_j, vec![1.0, -2.0, 3.5]);
        assert_eq!(mm.cov_j, Matrix::zeros(3, 3));
    }

    #[test]
    fn mutilate_keeps_unclamped_columns() {
        let params = toy_params::<f64>();
        let w = weight_matrix(&params);
        let mm = mutilate(&params, &InterventionTarget::new([(1, 0.5)])).unwrap();
        for j in [0, 2] {
            assert_eq!(mm.w_j.column(j), w.column(j));
        }
        assert_eq!(mm.w_j.column(1), vec![0.0; 3]);
        assert!(mutilate(&params, &InterventionTarget::new([(3, 0.0)])).is_err());
    }

    #[test]
    fn edge_weight_map_must_match_edges() {
        let dag = DagStructure::from_one_based(3, &[(1, 2), (2, 3)]).unwrap();
        let m = vec![0.0; 3];
        let s = vec![1.0; 3];
        assert_eq!(
            GbnParams::from_edge_weights(dag.clone(), m.clone(), s.clone(), &[((0, 1), 1.0)]),
            Err(ModelError::MissingWeight(1, 2))
        );
        assert_eq!(
            GbnParams::from_edge_weights(
                dag.clone(),
                m.clone(),
                s.clone(),
                &[((0, 1), 1.0), ((1, 2), 1.0), ((0, 2), 1.0)]
            ),
            Err(ModelError::UnknownEdge(0, 2))
        );
        assert!(matches!(
            GbnParams::new(dag, m, vec![1.0, 0.0, 1.0], vec![0.0; 2]),
            Err(ModelError::NonPositiveSigma { node: 1, .. })
        ));
    }
}
