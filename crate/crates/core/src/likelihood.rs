//! Exact log-likelihood of mixed observational/intervention data and the
//! analytic derivatives of its profile over the intercepts `m`.
//!
//! With `K_j` the rows where node `j` is not clamped and `N_j = |K_j|`:
//!
//! ```text
//! ℓ(m,σ,w) = -½ log(2π) Σ_j N_j - Σ_j N_j log σ_j
//!            - ½ Σ_j σ_j⁻² Σ_{k∈K_j} (x^k_j - Σ_i w_ij x^k_i - m_j)²
//! ```
//!
//! Clamped coordinates are point masses and contribute nothing. Profiling
//! out `m` replaces `x` by `y^{k,j} = x^k - mean_{K_j}(x)`.

use thiserror::Error;

use crate::graph::DagStructure;
use crate::linalg::Matrix;
use crate::model::GbnParams;
use crate::sampler::Dataset;
use crate::scalar::{ln_two_pi, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LikelihoodError {
    #[error("sigma[{}] = {value} must be positive", .node + 1)]
    NonPositiveSigma { node: usize, value: f64 },
    #[error("{field} has length {got}, expected {expected}")]
    Length {
        field: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Per-node centered rows `y^{k,j}` for `k ∈ K_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredData<T> {
    p: usize,
    k_sets: Vec<Vec<usize>>,
    means: Vec<Vec<T>>,
    y: Vec<Matrix<T>>,
}

impl<T: Scalar> CenteredData<T> {
    pub fn p(&self) -> usize {
        self.p
    }

    /// `K_j` as row indices into the original dataset.
    pub fn k_set(&self, j: usize) -> &[usize] {
        &self.k_sets[j]
    }

    /// `N_j`.
    pub fn n_j(&self, j: usize) -> usize {
        self.k_sets[j].len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.k_sets.iter().map(Vec::len).collect()
    }

    /// Column means over `K_j` (empty when `N_j = 0`).
    pub fn means(&self, j: usize) -> &[T] {
        &self.means[j]
    }

    /// `N_j × p` block of centered rows, in the order of [`k_set`](Self::k_set).
    pub fn y(&self, j: usize) -> &Matrix<T> {
        &self.y[j]
    }
}

/// Centers each full row over the rows `K_j` in which node `j` is free.
/// For observational data every block equals the usual column-centered data.
pub fn center<T: Scalar>(data: &Dataset<T>) -> CenteredData<T> {
    let p = data.p();
    let mut k_sets = Vec::with_capacity(p);
    let mut means = Vec::with_capacity(p);
    let mut ys = Vec::with_capacity(p);
    for j in 0..p {
        let ks = data.unclamped_rows(j);
        if ks.is_empty() {
            means.push(Vec::new());
            ys.push(Matrix::zeros(0, p));
            k_sets.push(ks);
            continue;
        }
        let mean = column_means(data.x(), &ks);
        let mut y = Matrix::zeros(ks.len(), p);
        for (r, &k) in ks.iter().enumerate() {
            for ((o, &x), &mu) in y.row_mut(r).iter_mut().zip(data.row(k)).zip(&mean) {
                *o = x - mu;
            }
        }
        means.push(mean);
        ys.push(y);
        k_sets.push(ks);
    }
    CenteredData {
        p,
        k_sets,
        means,
        y: ys,
    }
}

fn column_means<T: Scalar>(x: &Matrix<T>, rows: &[usize]) -> Vec<T> {
    let mut mean = vec![T::zero(); x.cols()];
    for &k in rows {
        for (m, &v) in mean.iter_mut().zip(x.row(k)) {
            *m = *m + v;
        }
    }
    let inv = T::one() / T::count(rows.len());
    mean.iter_mut().for_each(|m| *m = *m * inv);
    mean
}

/// Plain column centering of an observational sample.
pub fn center_observational<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mean = column_means(x, &rows);
    let mut y = x.clone();
    for k in 0..y.rows() {
        for (v, &mu) in y.row_mut(k).iter_mut().zip(&mean) {
            *v = *v - mu;
        }
    }
    y
}

/// `x_j - Σ_{i∈pa(j)} w_ij x_i` over the parent list.
#[inline]
pub(crate) fn node_residual<T: Scalar>(dag: &DagStructure, w: &[T], row: &[T], j: usize) -> T {
    let mut r = row[j];
    for (e, &i) in dag.incoming(j).zip(dag.parents_of(j)) {
        r = r - w[e] * row[i];
    }
    r
}

fn check_inputs<T: Scalar>(
    dag: &DagStructure,
    sigma: &[T],
    w: &[T],
    counts: &[usize],
) -> Result<(), LikelihoodError> {
    let len = |field, got, expected| {
        if got == expected {
            Ok(())
        } else {
            Err(LikelihoodError::Length {
                field,
                got,
                expected,
            })
        }
    };
    len("sigma", sigma.len(), dag.p())?;
    len("w", w.len(), dag.num_edges())?;
    len("data columns", counts.len(), dag.p())?;
    for (node, (&s, &n)) in sigma.iter().zip(counts).enumerate() {
        if n > 0 && !(s > T::zero()) {
            return Err(LikelihoodError::NonPositiveSigma {
                node,
                value: s.as_f64(),
            });
        }
    }
    Ok(())
}

/// Exact log-likelihood of `data` under `params`, summing over `K_j` only.
pub fn loglik<T: Scalar>(params: &GbnParams<T>, data: &Dataset<T>) -> Result<T, LikelihoodError> {
    let dag = params.dag();
    let counts = data.unclamped_counts();
    check_inputs(dag, params.sigma(), params.w(), &counts)?;
    let half = T::lit(0.5);
    let mut total = T::zero();
    for j in 0..dag.p() {
        let n_j = counts[j];
        if n_j == 0 {
            continue;
        }
        let s = params.sigma()[j];
        let mut ss = T::zero();
        for k in 0..data.n() {
            if data.target(k).is_clamped(j) {
                continue;
            }
            let r = node_residual(dag, params.w(), data.row(k), j) - params.m()[j];
            ss = ss + r * r;
        }
        let nj = T::count(n_j);
        total = total - half * ln_two_pi::<T>() * nj - nj * s.ln() - half * ss / (s * s);
    }
    Ok(total)
}

/// Observational log-likelihood written directly over all `N p` cells.
pub fn loglik_observational<T: Scalar>(params: &GbnParams<T>, x: &Matrix<T>) -> Result<T, LikelihoodError> {
    let dag = params.dag();
    let n = x.rows();
    check_inputs(dag, params.sigma(), params.w(), &vec![n; x.cols()])?;
    let half = T::lit(0.5);
    let nt = T::count(n);
    let mut quad = T::zero();
    let mut log_sigma = T::zero();
    for j in 0..dag.p() {
        let s = params.sigma()[j];
        log_sigma = log_sigma + s.ln();
        let mut ss = T::zero();
        for k in 0..n {
            let r = node_residual(dag, params.w(), x.row(k), j) - params.m()[j];
            ss = ss + r * r;
        }
        quad = quad + ss / (s * s);
    }
    Ok(-half * nt * T::count(dag.p()) * ln_two_pi::<T>() - nt * log_sigma - half * quad)
}

/// Per-node residual sum `S_j = Σ_{k∈K_j} (y_j - Σ_i w_ij y_i)²`.
pub fn residual_sums<T: Scalar>(dag: &DagStructure, w: &[T], cdata: &CenteredData<T>) -> Vec<T> {
    (0..dag.p())
        .map(|j| {
            let y = cdata.y(j);
            (0..y.rows())
                .map(|r| {
                    let res = node_residual(dag, w, y.row(r), j);
                    res * res
                })
                .sum()
        })
        .collect()
}

/// Profile log-likelihood `ℓ̃(σ, w)`, the maximum of [`loglik`] over `m`.
pub fn profiled_loglik<T: Scalar>(
    dag: &DagStructure,
    sigma: &[T],
    w: &[T],
    cdata: &CenteredData<T>,
) -> Result<T, LikelihoodError> {
    let counts = cdata.counts();
    check_inputs(dag, sigma, w, &counts)?;
    let sums = residual_sums(dag, w, cdata);
    let half = T::lit(0.5);
    let mut total = T::zero();
    for j in 0..dag.p() {
        if counts[j] == 0 {
            continue;
        }
        let nj = T::count(counts[j]);
        let s = sigma[j];
        total = total - half * ln_two_pi::<T>() * nj - nj * s.ln() - half * sums[j] / (s * s);
    }
    Ok(total)
}

/// Observational profile log-likelihood on column-centered data `y`.
pub fn profiled_loglik_observational<T: Scalar>(
    dag: &DagStructure,
    sigma: &[T],
    w: &[T],
    y: &Matrix<T>,
) -> Result<T, LikelihoodError> {
    let n = y.rows();
    check_inputs(dag, sigma, w, &vec![n; y.cols()])?;
    let half = T::lit(0.5);
    let nt = T::count(n);
    let mut total = -half * nt * T::count(dag.p()) * ln_two_pi::<T>();
    for j in 0..dag.p() {
        let s = sigma[j];
        let ss: T = (0..n)
            .map(|k| {
                let r = node_residual(dag, w, y.row(k), j);
                r * r
            })
            .sum();
        total = total - nt * s.ln() - half * ss / (s * s);
    }
    Ok(total)
}

/// Gradient of [`profiled_loglik`] in canonical order: `∂/∂w` by edge,
/// then `∂/∂σ_1 … ∂/∂σ_p`.
pub fn gradient<T: Scalar>(
    dag: &DagStructure,
    sigma: &[T],
    w: &[T],
    cdata: &CenteredData<T>,
) -> Result<Vec<T>, LikelihoodError> {
    let counts = cdata.counts();
    check_inputs(dag, sigma, w, &counts)?;
    let n_edges = dag.num_edges();
    let mut g = vec![T::zero(); dag.num_params()];
    for j in 0..dag.p() {
        if counts[j] == 0 {
            continue;
        }
        let y = cdata.y(j);
        let s = sigma[j];
        let s2 = s * s;
        let mut ss = T::zero();
        for r in 0..y.rows() {
            let row = y.row(r);
            let res = node_residual(dag, w, row, j);
            ss = ss + res * res;
            for (e, &i) in dag.incoming(j).zip(dag.parents_of(j)) {
                g[e] = g[e] + row[i] * res;
            }
        }
        for e in dag.incoming(j) {
            g[e] = g[e] / s2;
        }
        g[n_edges + j] = -T::count(counts[j]) / s + ss / (s2 * s);
    }
    Ok(g)
}

/// Hessian of [`profiled_loglik`] in canonical order. Parameters of
/// different child nodes never interact, so the matrix is block diagonal
/// by child.
pub fn hessian<T: Scalar>(
    dag: &DagStructure,
    sigma: &[T],
    w: &[T],
    cdata: &CenteredData<T>,
) -> Result<Matrix<T>, LikelihoodError> {
    let counts = cdata.counts();
    check_inputs(dag, sigma, w, &counts)?;
    let n_edges = dag.num_edges();
    let mut h: Matrix<T> = Matrix::zeros(dag.num_params(), dag.num_params());
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    for j in 0..dag.p() {
        if counts[j] == 0 {
            continue;
        }
        let y = cdata.y(j);
        let s = sigma[j];
        let s2 = s * s;
        let sj = n_edges + j;
        let parents = dag.parents_of(j);
        let edges = dag.incoming(j);
        let mut ss = T::zero();
        for r in 0..y.rows() {
            let row = y.row(r);
            let res = node_residual(dag, w, row, j);
            ss = ss + res * res;
            for (a, &i) in edges.clone().zip(parents) {
                h[(a, sj)] = h[(a, sj)] + row[i] * res;
                for (b, &i2) in edges.clone().zip(parents) {
                    if b > a {
                        break;
                    }
                    h[(a, b)] = h[(a, b)] + row[i] * row[i2];
                }
            }
        }
        for a in edges.clone() {
            for b in edges.start..=a {
                let v = -h[(a, b)] / s2;
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
            let v = -two * h[(a, sj)] / (s2 * s);
            h[(a, sj)] = v;
            h[(sj, a)] = v;
        }
        h[(sj, sj)] = T::count(counts[j]) / s2 - three * ss / (s2 * s2);
    }
    Ok(h)
}
