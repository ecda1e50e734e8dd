//! Small dense linear algebra: a row-major matrix, a pivot-checked
//! Cholesky factorization and a cyclic Jacobi symmetric eigensolver.
//!
//! Matrices here are the size of a parent set or a parameter vector, so
//! everything is dense and allocation-light rather than blocked.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + vi * a;
            }
        }
        out
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    /// Largest absolute entry of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        self.sub(rhs)
            .data
            .into_iter()
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Principal submatrix on `idx` (rows and columns).
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    /// Converts every entry to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            writeln!(f, "  {:?}", row)?;
        }
        write!(f, "]")
    }
}

/// Relative pivot tolerance: a symmetric matrix is declared singular when
/// its smallest Cholesky pivot falls below `PIVOT_RTOL * trace / dim`.
pub const PIVOT_RTOL: f64 = 1e-10;

/// Failure of a pivot-checked factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    /// Position of the first pivot under the threshold.
    pub index: usize,
    pub pivot: f64,
    pub threshold: f64,
}

/// Cholesky factor `A = G Gᵀ` with `G` lower triangular.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    g: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric matrix, rejecting any pivot `d_k = G_kk²` at or
    /// below `PIVOT_RTOL * trace(A) / dim`. Only the lower triangle is read.
    pub fn factor(a: &Matrix<T>) -> Result<Self, SingularPivot> {
        Self::factor_with_rtol(a, T::lit(PIVOT_RTOL))
    }

    pub fn factor_with_rtol(a: &Matrix<T>, rtol: T) -> Result<Self, SingularPivot> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let n = a.rows();
        let threshold = if n == 0 {
            T::zero()
        } else {
            rtol * a.trace() / T::count(n)
        };
        let mut g = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d = d - g[(j, k)] * g[(j, k)];
            }
            if !(d > threshold) || !d.is_finite() {
                return Err(SingularPivot {
                    index: j,
                    pivot: d.as_f64(),
                    threshold: threshold.as_f64(),
                });
            }
            let gjj = d.sqrt();
            g[(j, j)] = gjj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - g[(i, k)] * g[(j, k)];
                }
                g[(i, j)] = s / gjj;
            }
        }
        Ok(Self { g })
    }

    pub fn dim(&self) -> usize {
        self.g.rows()
    }

    pub fn factor_matrix(&self) -> &Matrix<T> {
        &self.g
    }

    /// The pivots `d_k = G_kk²`.
    pub fn pivots(&self) -> Vec<T> {
        self.g.diagonal().into_iter().map(|x| x * x).collect()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s = s - self.g[(i, k)] * z[k];
            }
            z[i] = s / self.g[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s = s - self.g[(k, i)] * z[k];
            }
            z[i] = s / self.g[(i, i)];
        }
        z
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        self.g.diagonal().into_iter().map(|x| two * x.ln()).sum()
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // Symmetrize away rounding asymmetry.
        for i in 0..n {
            for j in 0..i {
                let v = (inv[(i, j)] + inv[(j, i)]) * T::lit(0.5);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

/// Eigen-decomposition `A = V diag(λ) Vᵀ` of a symmetric matrix by cyclic
/// Jacobi rotations. Eigenvalues are returned in ascending order and the
/// matching eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    assert!(a.is_square(), "eigendecomposition needs a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m[(i, j)] * m[(i, j)];
                if i == j {
                    scale = scale + x;
                } else {
                    off = off + x;
                }
            }
        }
        if off <= eps * eps * (scale + off) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| m[(a, a)].partial_cmp(&m[(b, b)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = idx.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, i)];
        }
    }
    (values, vectors)
}

/// Minimum-norm least-squares solution of a symmetric PSD system, treating
/// eigenvalues at or below `PIVOT_RTOL * trace / dim` as zero. Also returns
/// the basis of the discarded null space (as column vectors).
pub fn min_norm_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.rows();
    let (vals, vecs) = symmetric_eigen(a);
    let threshold = if n == 0 {
        T::zero()
    } else {
        T::lit(PIVOT_RTOL) * a.trace().abs() / T::count(n)
    };
    let mut x = vec![T::zero(); n];
    let mut null = Vec::new();
    for (c, &lam) in vals.iter().enumerate() {
        let u = vecs.column(c);
        if lam <= threshold {
            null.push(u);
            continue;
        }
        let coef = u.iter().zip(b).map(|(&ui, &bi)| ui * bi).sum::<T>() / lam;
        for (xi, &ui) in x.iter_mut().zip(&u) {
            *xi = *xi + coef * ui;
        }
    }
    (x, null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_and_inverts() {
        let a = Matrix::from_rows(&[[4.0f64, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]]);
        let ch = Cholesky::factor(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-14);
        }
        let prod = a.matmul(&ch.inverse());
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-14);
        // det = 4(15-1) - 2(6-0.4) + 0.4(2-2) = 44.8
        assert!((ch.log_det() - 44.8f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let err = Cholesky::factor(&a).unwrap_err();
        assert_eq!(err.index, 1);
        let z = Matrix::<f64>::zeros(2, 2);
        assert_eq!(Cholesky::factor(&z).unwrap_err().index, 0);
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = Matrix::from_rows(&[[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]);
        let (vals, v) = symmetric_eigen(&a);
        let s = 2f64.sqrt();
        for (got, want) in vals.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let rebuilt = v.matmul(&Matrix::from_diagonal(&vals)).matmul(&v.transpose());
        assert!(rebuilt.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn min_norm_on_rank_deficient() {
        // A = u uᵀ with u = (1, 1); b in range(A).
        let a = Matrix::from_rows(&[[1.0f64, 1.0], [1.0, 1.0]]);
        let (x, null) = min_norm_solve(&a, &[2.0, 2.0]);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert_eq!(null.len(), 1);
        assert!((null[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
