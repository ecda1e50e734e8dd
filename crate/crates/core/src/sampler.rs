//! Ancestral simulation of datasets under an intervention design.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::{GbnParams, InterventionTarget, ModelError};
use crate::scalar::Scalar;

/// Identifier of the generator behind [`sample`], recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha20";
/// Method used to draw standard normals (`rand_distr::StandardNormal`).
pub const NORMAL_METHOD: &str = "ziggurat";

/// Tolerance when checking a row against its declared clamps.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("design has no conditions")]
    EmptyDesign,
    #[error("condition {} has zero replicates", .0 + 1)]
    ZeroReps(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("row {} has {got} columns, expected {expected}", .row + 1)]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("row {} clamps node {} to {clamp} but holds {value}", .row + 1, .node + 1)]
    ClampMismatch {
        row: usize,
        node: usize,
        clamp: f64,
        value: f64,
    },
    #[error("row {} value at node {} is not finite", .row + 1, .node + 1)]
    NonFinite { row: usize, node: usize },
    #[error("dataset has {got} columns, model has {expected} nodes")]
    Width { got: usize, expected: usize },
}

/// One design condition: a target repeated `reps` times.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition<T> {
    pub target: InterventionTarget<T>,
    pub reps: usize,
}

/// An ordered list of repeated intervention conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec<T> {
    conditions: Vec<Condition<T>>,
}

impl<T: Scalar> DesignSpec<T> {
    pub fn new(conditions: Vec<Condition<T>>) -> Result<Self, DataError> {
        if conditions.is_empty() {
            return Err(DataError::EmptyDesign);
        }
        if let Some(k) = conditions.iter().position(|c| c.reps == 0) {
            return Err(DataError::ZeroReps(k));
        }
        Ok(Self { conditions })
    }

    /// A single observational condition with `n` rows.
    pub fn observational(n: usize) -> Result<Self, DataError> {
        Self::new(vec![Condition {
            target: InterventionTarget::observational(),
            reps: n,
        }])
    }

    pub fn conditions(&self) -> &[Condition<T>] {
        &self.conditions
    }

    /// Total row count `N`.
    pub fn total_rows(&self) -> usize {
        self.conditions.iter().map(|c| c.reps).sum()
    }

    /// `N_j`: rows in which node `j` is not clamped.
    pub fn unclamped_counts(&self, p: usize) -> Vec<usize> {
        (0..p)
            .map(|j| {
                self.conditions
                    .iter()
                    .filter(|c| !c.target.is_clamped(j))
                    .map(|c| c.reps)
                    .sum()
            })
            .collect()
    }

    /// Same conditions with every `reps` multiplied by `factor`.
    pub fn scaled(&self, factor: usize) -> Result<Self, DataError> {
        Self::new(
            self.conditions
                .iter()
                .map(|c| Condition {
                    target: c.target.clone(),
                    reps: c.reps * factor,
                })
                .collect(),
        )
    }

    pub fn validate(&self, p: usize) -> Result<(), DataError> {
        for c in &self.conditions {
            c.target.validate(p)?;
        }
        Ok(())
    }
}

/// `N` observed rows, each tagged with the intervention it was drawn under.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x: Matrix<T>,
    /// Distinct targets referenced by `row_target`.
    targets: Vec<InterventionTarget<T>>,
    row_target: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    /// Purely observational data.
    pub fn observational(x: Matrix<T>) -> Result<Self, DataError> {
        let n = x.rows();
        Self::from_parts(x, vec![InterventionTarget::observational()], vec![0; n])
    }

    /// One target per row. Clamped cells must equal their clamp value to
    /// within [`CLAMP_TOL`]; they are then stored as the exact clamp value.
    pub fn new(x: Matrix<T>, targets: Vec<InterventionTarget<T>>) -> Result<Self, DataError> {
        assert_eq!(x.rows(), targets.len(), "one target per row");
        // Deduplicate consecutive equal targets, which is how designs emit them.
        let mut distinct: Vec<InterventionTarget<T>> = Vec::new();
        let mut row_target = Vec::with_capacity(targets.len());
        for t in targets {
            match distinct.iter().position(|d| *d == t) {
                Some(k) => row_target.push(k),
                None => {
                    row_target.push(distinct.len());
                    distinct.push(t);
                }
            }
        }
        Self::from_parts(x, distinct, row_target)
    }

    pub fn from_parts(
        mut x: Matrix<T>,
        targets: Vec<InterventionTarget<T>>,
        row_target: Vec<usize>,
    ) -> Result<Self, DataError> {
        assert_eq!(x.rows(), row_target.len());
        let p = x.cols();
        for t in &targets {
            t.validate(p)?;
        }
        let tol = T::lit(CLAMP_TOL);
        for (row, &t) in row_target.iter().enumerate() {
            for node in 0..p {
                if !x[(row, node)].is_finite() {
                    return Err(DataError::NonFinite { row, node });
                }
            }
            for (node, clamp) in targets[t].iter() {
                let value = x[(row, node)];
                if (value - clamp).abs() > tol {
                    return Err(DataError::ClampMismatch {
                        row,
                        node,
                        clamp: clamp.as_f64(),
                        value: value.as_f64(),
                    });
                }
                x[(row, node)] = clamp;
            }
        }
        Ok(Self {
            x,
            targets,
            row_target,
        })
    }

    #[inline]
    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        self.x.row(k)
    }

    #[inline]
    pub fn target(&self, k: usize) -> &InterventionTarget<T> {
        &self.targets[self.row_target[k]]
    }

    pub fn is_observational(&self) -> bool {
        (0..self.n()).all(|k| self.target(k).is_observational())
    }

    /// `K_j`: rows where node `j` is not clamped.
    pub fn unclamped_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&k| !self.target(k).is_clamped(j))
            .collect()
    }

    /// `N_j` for every node.
    pub fn unclamped_counts(&self) -> Vec<usize> {
        (0..self.p()).map(|j| self.unclamped_rows(j).len()).collect()
    }

    /// The same rows with columns rearranged: column `c` of the result is
    /// column `perm[c]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let p = self.p();
        assert_eq!(perm.len(), p);
        let mut inv = vec![0; p];
        for (c, &src) in perm.iter().enumerate() {
            inv[src] = c;
        }
        let mut x = Matrix::zeros(self.n(), p);
        for k in 0..self.n() {
            for (c, &src) in perm.iter().enumerate() {
                x[(k, c)] = self.x[(k, src)];
            }
        }
        let targets = self
            .targets
            .iter()
            .map(|t| InterventionTarget::new(t.iter().map(|(j, v)| (inv[j], v))))
            .collect();
        Self {
            x,
            targets,
            row_target: self.row_target.clone(),
        }
    }
}

/// Draws a dataset from `design` using a ChaCha20 stream seeded with `seed`.
pub fn sample<T: Scalar>(
    params: &GbnParams<T>,
    design: &DesignSpec<T>,
    seed: u64,
) -> Result<Dataset<T>, DataError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_with_rng(params, design, &mut rng)
}

/// Ancestral sampling: rows are generated condition by condition, nodes in
/// topological order, clamped nodes taking their target value.
pub fn sample_with_rng<T: Scalar, R: Rng + ?Sized>(
    params: &GbnParams<T>,
    design: &DesignSpec<T>,
    rng: &mut R,
) -> Result<Dataset<T>, DataError> {
    let p = params.p();
    design.validate(p)?;
    let dag = params.dag();
    let n = design.total_rows();
    let mut x = Matrix::zeros(n, p);
    let mut row_target = Vec::with_capacity(n);
    let mut k = 0;
    for (c, cond) in design.conditions().iter().enumerate() {
        for _ in 0..cond.reps {
            let row = x.row_mut(k);
            for &j in dag.topological() {
                row[j] = match cond.target.value(j) {
                    Some(v) => v,
                    None => {
                        let mut v = params.m()[j];
                        for (e, &i) in dag.incoming(j).zip(dag.parents_of(j)) {
                            v = v + params.w()[e] * row[i];
                        }
                        let z: f64 = rng.sample(StandardNormal);
                        v + params.sigma()[j] * T::lit(z)
                    }
                };
            }
            row_target.push(c);
            k += 1;
        }
    }
    let targets = design
        .conditions()
        .iter()
        .map(|c| c.target.clone())
        .collect();
    Ok(Dataset {
        x,
        targets,
        row_target,
    })
}
