//! Small dense linear algebra: a row-major matrix and slice helpers.
//!
//! Everything here is sized for desk-scale problems (a few thousand rows at
//! most), so no attempt is made at blocking or SIMD.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
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
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(nrows: usize, columns: &[Vec<T>]) -> Result<Self> {
        for (j, c) in columns.iter().enumerate() {
            if c.len() != nrows {
                return Err(Error::Dimension(format!(
                    "column {j} has {} entries, expected {nrows}",
                    c.len()
                )));
            }
        }
        Ok(Self::from_fn(nrows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn diagonal(d: &[T]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { T::zero() })
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
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]))
    }

    /// `A x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`.
    pub fn tr_matvec(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * yi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// `AᵀA`, symmetric by construction.
    pub fn gram(&self) -> Matrix<T> {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ri = row[i];
                if ri == T::zero() {
                    continue;
                }
                for j in i..n {
                    let v = g.get(i, j) + ri * row[j];
                    g.set(i, j, v);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                let v = g.get(j, i);
                g.set(i, j, v);
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    /// Largest absolute row sum, `‖A‖_∞`.
    pub fn max_row_abs_sum(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest absolute column sum, `‖A‖_1`.
    pub fn max_col_abs_sum(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Upper bound on the spectral norm `‖A‖₂`.
    ///
    /// The largest eigenvalue of the smaller Gram matrix is computed with
    /// cyclic Jacobi and inflated by its worst-case rounding error, then
    /// capped by the Frobenius norm and by `sqrt(‖A‖₁‖A‖_∞)`, both of which
    /// are exact upper bounds.
    pub fn spectral_norm_bound(&self) -> T {
        if self.rows == 0 || self.cols == 0 {
            return T::zero();
        }
        let g = if self.rows >= self.cols {
            self.gram()
        } else {
            self.transpose().gram()
        };
        let (vals, _) = symmetric_eigen(&g);
        let top = vals.iter().copied().fold(T::zero(), T::max);
        let slack = T::lit(64.0) * T::from_usize(g.rows()).unwrap() * T::epsilon()
            * g.frobenius_norm();
        let jacobi = (top + slack).sqrt();
        let frob = self.frobenius_norm();
        let holder = (self.max_col_abs_sum() * self.max_row_abs_sum()).sqrt();
        jacobi.min(frob).min(holder)
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

pub fn norm_l1<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|v| v.abs()).sum()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// `y += alpha * x`.
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a non-positive pivot shows up.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return None;
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d = d - l.get(j, k) * l.get(j, k);
        }
        if d <= T::zero() || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Some(l)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn cholesky_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let l = cholesky(a)?;
    let n = b.len();
    let mut z = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l.get(i, k) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s = s - l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    Some(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (unsorted) and a matrix whose columns are the
/// corresponding orthonormal eigenvectors.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let tol = T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let x = m.get(i, j) * m.get(i, j);
                total = total + x;
                if i != j {
                    off = off + x;
                }
            }
        }
        if off <= tol * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| m.get(i, i)).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_of_two_columns() {
        let c = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let g = c.gram();
        assert_eq!(g.as_slice(), &[1.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = cholesky_solve(&a, &[1.0, 2.0]).unwrap();
        let back = a.matvec(&x);
        assert!(f64::abs(back[0] - 1.0) < 1e-14 && f64::abs(back[1] - 2.0) < 1e-14);
    }

    #[test]
    fn jacobi_recovers_eigenvalues() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (mut vals, vecs) = symmetric_eigen(&a);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(f64::abs(vals[0] - 1.0) < 1e-12 && f64::abs(vals[1] - 3.0) < 1e-12);
        let v0 = vecs.column(0);
        assert!(f64::abs(norm(&v0) - 1.0) < 1e-12);
    }

    #[test]
    fn spectral_bound_is_tight_on_identity() {
        let i2 = Matrix::<f64>::identity(2);
        let s = i2.spectral_norm_bound();
        assert!((1.0..1.0 + 1e-12).contains(&s));
    }

    #[test]
    fn spectral_bound_dominates_power_iteration() {
        let a = Matrix::from_rows(&[
            vec![0.3, -1.2, 2.0],
            vec![1.5, 0.1, -0.4],
            vec![-0.7, 0.9, 0.2],
            vec![0.0, 2.2, 1.1],
        ])
        .unwrap();
        let mut v = vec![1.0, 1.0, 1.0];
        for _ in 0..500 {
            let w = a.tr_matvec(&a.matvec(&v));
            let n = norm(&w);
            v = w.iter().map(|x| x / n).collect();
        }
        let est = norm(&a.matvec(&v));
        let bound = a.spectral_norm_bound();
        assert!(bound >= est && bound < est * (1.0 + 1e-9));
    }
}
