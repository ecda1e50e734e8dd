//! Reference implementations used only by the integration tests. None of
//! these call into the library's own linear algebra: matrices are plain
//! `Vec<Vec<f64>>`, systems are solved by Gaussian elimination with
//! partial pivoting and `L` comes from the finite power series.

#![allow(dead_code)]

use gbn_core::graph::DagStructure;
use gbn_core::model::{GbnParams, InterventionTarget};
use gbn_core::sampler::{Condition, Dataset, DesignSpec};
use gbn_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Dense = Vec<Vec<f64>>;

pub fn eye(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                c[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    c
}

pub fn transpose(a: &Dense) -> Dense {
    let m = a.first().map_or(0, Vec::len);
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn to_dense(m: &Matrix<f64>) -> Dense {
    m.to_rows()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// LU factorization with partial pivoting; returns `(lu, perm, sign)`.
fn lu(a: &Dense) -> (Dense, Vec<usize>, f64) {
    let n = a.len();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| lu[i][c].abs().total_cmp(&lu[j][c].abs()))
            .unwrap();
        if piv != c {
            lu.swap(piv, c);
            perm.swap(piv, c);
            sign = -sign;
        }
        let d = lu[c][c];
        assert!(d != 0.0, "singular matrix in oracle LU");
        for r in c + 1..n {
            let f = lu[r][c] / d;
            lu[r][c] = f;
            for k in c + 1..n {
                lu[r][k] -= f * lu[c][k];
            }
        }
    }
    (lu, perm, sign)
}

pub fn solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let (lu, perm, _) = lu(a);
    let n = a.len();
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            y[i] -= lu[i][k] * y[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= lu[i][k] * y[k];
        }
        y[i] /= lu[i][i];
    }
    y
}

pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            solve(a, &e)
        })
        .collect();
    transpose(&cols)
}

/// `log |det a|`.
pub fn log_abs_det(a: &Dense) -> f64 {
    let (lu, _, _) = lu(a);
    (0..a.len()).map(|i| lu[i][i].abs().ln()).sum()
}

pub fn det(a: &Dense) -> f64 {
    let (lu, _, sign) = lu(a);
    sign * (0..a.len()).map(|i| lu[i][i]).product::<f64>()
}

/// `I + W + W² + … + W^{p-1}`.
pub fn series_path(w: &Dense) -> Dense {
    let p = w.len();
    let mut acc = eye(p);
    let mut term = eye(p);
    for _ in 1..p {
        term = matmul(&term, w);
        for i in 0..p {
            for j in 0..p {
                acc[i][j] += term[i][j];
            }
        }
    }
    acc
}

pub fn dense_weights(params: &GbnParams<f64>) -> Dense {
    let p = params.p();
    let mut w = vec![vec![0.0; p]; p];
    for e in params.dag().edges() {
        w[e.parent][e.child] = params.weight(e.parent, e.child).unwrap();
    }
    w
}

/// Moments of the model under `do(target)`, straight from the definition:
/// zero the clamped columns of `W`, sum the series, and propagate the
/// noise of the free nodes only.
pub fn mutilated_moments(params: &GbnParams<f64>, target: &InterventionTarget<f64>) -> (Vec<f64>, Dense) {
    let p = params.p();
    let mut w = dense_weights(params);
    let mut nu = params.m().to_vec();
    let mut var: Vec<f64> = params.sigma().iter().map(|s| s * s).collect();
    for (j, v) in target.iter() {
        for row in w.iter_mut() {
            row[j] = 0.0;
        }
        nu[j] = v;
        var[j] = 0.0;
    }
    let l = series_path(&w);
    let mu: Vec<f64> = (0..p).map(|j| (0..p).map(|i| nu[i] * l[i][j]).sum()).collect();
    let mut cov = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            cov[a][b] = (0..p).map(|k| l[k][a] * var[k] * l[k][b]).sum();
        }
    }
    (mu, cov)
}

pub fn mvn_logpdf(x: &[f64], mu: &[f64], cov: &Dense) -> f64 {
    let d: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let q: f64 = solve(cov, &d).iter().zip(&d).map(|(a, b)| a * b).sum();
    -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + log_abs_det(cov) + q)
}

/// Sum over rows of the log density of the free coordinates under the
/// row's mutilated Gaussian.
pub fn oracle_loglik(params: &GbnParams<f64>, data: &Dataset<f64>) -> f64 {
    (0..data.n())
        .map(|k| {
            let t = data.target(k);
            let free: Vec<usize> = (0..data.p()).filter(|&j| !t.is_clamped(j)).collect();
            if free.is_empty() {
                return 0.0;
            }
            let (mu, cov) = mutilated_moments(params, t);
            let x: Vec<f64> = free.iter().map(|&j| data.row(k)[j]).collect();
            let m: Vec<f64> = free.iter().map(|&j| mu[j]).collect();
            let c: Dense = free
                .iter()
                .map(|&a| free.iter().map(|&b| cov[a][b]).collect())
                .collect();
            mvn_logpdf(&x, &m, &c)
        })
        .sum()
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-11 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Central differences of a scalar function.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Central differences of a vector function; row `i` is `∂f/∂x_i`.
pub fn central_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Dense {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            f(&up)
                .iter()
                .zip(f(&dn))
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect()
        })
        .collect()
}

/// Mean and standard error of `-H(θ*)` over `reps` simulated datasets.
pub struct ExpectedHessian {
    pub mean: Dense,
    pub se: Dense,
}

pub fn expected_neg_hessian(params: &GbnParams<f64>, design: &DesignSpec<f64>, reps: usize, seed: u64) -> ExpectedHessian {
    let k = params.dag().num_params();
    const CHUNK: usize = 1000;
    let chunks = reps.div_ceil(CHUNK);
    let partial: Vec<(Dense, Dense)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut s = vec![vec![0.0; k]; k];
            let mut s2 = vec![vec![0.0; k]; k];
            for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let data = gbn_core::sample(params, design, seed ^ ((r as u64) << 20)).unwrap();
                let cd = gbn_core::center(&data);
                let h = gbn_core::hessian(params.dag(), params.sigma(), params.w(), &cd).unwrap();
                for a in 0..k {
                    for b in 0..k {
                        let v = -h[(a, b)];
                        s[a][b] += v;
                        s2[a][b] += v * v;
                    }
                }
            }
            (s, s2)
        })
        .collect();
    let mut s = vec![vec![0.0; k]; k];
    let mut s2 = vec![vec![0.0; k]; k];
    for (a, b) in partial {
        for i in 0..k {
            for j in 0..k {
                s[i][j] += a[i][j];
                s2[i][j] += b[i][j];
            }
        }
    }
    let n = reps as f64;
    let mut mean = vec![vec![0.0; k]; k];
    let mut se = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let m = s[i][j] / n;
            let var = (s2[i][j] / n - m * m).max(0.0) * n / (n - 1.0);
            mean[i][j] = m;
            se[i][j] = (var / n).sqrt();
        }
    }
    ExpectedHessian { mean, se }
}

// Toy model and fixtures.

pub fn toy_dag() -> DagStructure {
    DagStructure::from_one_based(3, &[(1, 2), (1, 3), (2, 3)]).unwrap()
}

pub fn toy_params() -> GbnParams<f64> {
    GbnParams::new(toy_dag(), vec![0.5, 1.2, 0.7], vec![0.3, 1.1, 0.6], vec![-0.8, 0.9, 0.5]).unwrap()
}

pub fn observational_fixture() -> Dataset<f64> {
    Dataset::observational(Matrix::from_rows(&[
        [1.1025540, -0.2652622, 1.957083],
        [0.6721755, 0.4286717, 1.605024],
        [0.3455340, 2.8835932, 1.932982],
        [0.4139627, 1.0847936, 1.250889],
        [0.2844364, 1.0490652, 1.446954],
    ]))
    .unwrap()
}

pub fn five_condition_targets() -> Vec<InterventionTarget<f64>> {
    vec![
        InterventionTarget::new([(0, -0.5)]),
        InterventionTarget::new([(1, 0.5)]),
        InterventionTarget::new([(2, 0.1)]),
        InterventionTarget::new([(0, -1.5), (1, 2.5)]),
        InterventionTarget::observational(),
    ]
}

pub fn intervention_fixture() -> Dataset<f64> {
    let x = Matrix::from_rows(&[
        [-0.50000000, 0.9391031, 0.7665494],
        [0.47655556, 0.5000000, 1.4537910],
        [0.09892252, 1.2963643, 0.1000000],
        [-1.50000000, 2.5000000, 0.3326028],
        [0.36614988, 1.1787898, 1.9014714],
    ]);
    Dataset::new(x, five_condition_targets()).unwrap()
}

pub fn five_condition_design(reps: usize) -> DesignSpec<f64> {
    DesignSpec::new(
        five_condition_targets()
            .into_iter()
            .map(|target| Condition { target, reps })
            .collect(),
    )
    .unwrap()
}

// Random instances.

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random DAG on `p` nodes under a random labelling; each pair is an edge
/// with probability `density`.
pub fn random_dag(rng: &mut impl Rng, p: usize, density: f64) -> DagStructure {
    let mut labels: Vec<usize> = (0..p).collect();
    for i in (1..p).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let mut edges = Vec::new();
    for j in 0..p {
        for i in 0..j {
            if rng.random_bool(density) {
                edges.push((labels[i], labels[j]));
            }
        }
    }
    DagStructure::new(p, &edges).unwrap()
}

pub fn random_params(rng: &mut impl Rng, dag: DagStructure) -> GbnParams<f64> {
    let p = dag.p();
    let m = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let sigma = (0..p).map(|_| rng.random_range(0.3..2.0)).collect();
    let w = (0..dag.num_edges()).map(|_| rng.random_range(-1.2..1.2)).collect();
    GbnParams::new(dag, m, sigma, w).unwrap()
}

/// Random target clamping each node with probability `prob`.
pub fn random_target(rng: &mut impl Rng, p: usize, prob: f64) -> InterventionTarget<f64> {
    let mut pairs = Vec::new();
    for j in 0..p {
        if rng.random_bool(prob) {
            pairs.push((j, rng.random_range(-3.0..3.0)));
        }
    }
    InterventionTarget::new(pairs)
}

/// Mixed design with `conds` conditions whose reps sum to at most `n_max`.
pub fn random_design(rng: &mut impl Rng, p: usize, conds: usize, n_max: usize) -> DesignSpec<f64> {
    let per = (n_max / conds).max(1);
    let conditions = (0..conds)
        .map(|c| Condition {
            target: if c == 0 {
                InterventionTarget::observational()
            } else {
                random_target(rng, p, 0.3)
            },
            reps: rng.random_range(1..=per),
        })
        .collect();
    DesignSpec::new(conditions).unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
