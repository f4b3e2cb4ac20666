//! Small dense real linear algebra: vectors, row-major matrices, a
//! partial-pivot LU solve, power iteration and central differences.
//!
//! Problem sizes in this crate stay in the low hundreds, so everything is
//! dense and allocation-per-call.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::{floor_tol, Scalar};

/// Relative step used by the scaled finite-difference helpers.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular matrix: pivot {pivot:e} in column {column} below floor {floor:e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        floor: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("power iteration started from the zero vector")]
    ZeroStart,
}

/// Dense column vector with finite entries.
#[derive(Clone, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(data: Vec<T>) -> Result<Self, LinalgError> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(i));
        }
        Ok(Self { data })
    }

    /// Wraps arithmetic output without the finiteness scan. Diverging
    /// iterates are detected by the solver, not here.
    pub(crate) fn from_raw(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            data: vec![T::zero(); n],
        }
    }

    pub fn from_elem(n: usize, value: T) -> Self {
        Self {
            data: vec![value; n],
        }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> T) -> Self {
        Self {
            data: (0..n).map(f).collect(),
        }
    }

    /// Unit basis vector `e_i` of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[i] = T::one();
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_raw(self.data.iter().map(|&v| v * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        )
    }

    /// Componentwise product.
    pub fn hadamard(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        )
    }

    pub fn map(&self, f: impl FnMut(T) -> T) -> Self {
        Self::from_raw(self.data.iter().copied().map(f).collect())
    }

    /// Copy of the sub-range `[start, start + len)`.
    pub fn segment(&self, start: usize, len: usize) -> Self {
        Self::from_raw(self.data[start..start + len].to_vec())
    }

    pub fn concat(a: &Self, b: &Self) -> Self {
        let mut data = Vec::with_capacity(a.len() + b.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Self::from_raw(data)
    }

    /// Lossy copy into `f64` for reporting and serialization.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }
}

impl<T: Scalar, const N: usize> From<[T; N]> for Vector<T> {
    /// Panics on non-finite entries.
    fn from(arr: [T; N]) -> Self {
        Self::new(arr.to_vec()).expect("finite vector literal")
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

impl<T: fmt::Debug> fmt::Debug for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from row slices. Panics on ragged or non-finite input.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::new(r, c, data).expect("finite matrix literal")
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&Vector::from_elem(n, T::one()))
    }

    pub fn from_diag(d: &Vector<T>) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
        }
        m
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

    /// `u vᵗ`.
    pub fn outer(u: &Vector<T>, v: &Vector<T>) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.cols, v.len());
        Vector::from_raw(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(&a, &b)| a * b).sum())
                .collect(),
        )
    }

    /// `selfᵗ v` without materializing the transpose.
    pub fn matvec_t(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.rows, v.len());
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * vi;
            }
        }
        Vector::from_raw(out)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&a| a * s).collect(),
        )
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_raw(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        )
    }

    /// Sum of squared entries.
    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|&a| a * a).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Largest entrywise deviation from symmetry, relative to `1 + max|a_ij|`.
    pub fn asymmetry(&self) -> T {
        let scale = T::one() + self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()));
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = (0..self.rows)
            .map(|i| &self.data[i * self.cols..(i + 1) * self.cols])
            .collect();
        f.debug_list().entries(rows).finish()
    }
}

/// LU factors of a square matrix with partial pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    /// Factors `m`. A pivot below `1e-14 * ‖m‖∞` is reported as
    /// [`LinalgError::SingularMatrix`] and never regularized here.
    pub fn new(m: &Matrix<T>) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let n = m.rows;
        let floor = floor_tol::<T>(1e-14, 8.0) * m.norm_inf();
        let mut a = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold(
                        (k, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pmax > floor) {
                return Err(LinalgError::SingularMatrix {
                    column: k,
                    pivot: pmax.as_f64(),
                    floor: floor.as_f64(),
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    a[i * n + j] = a[i * n + j] - factor * a[k * n + j];
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, rhs: &Vector<T>) -> Result<Vector<T>, LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let a = &self.lu;
        let mut b: Vec<T> = self.perm.iter().map(|&p| rhs.data[p]).collect();
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s = s - a[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s = s - a[i * n + j] * b[j];
            }
            b[i] = s / a[i * n + i];
        }
        Ok(Vector::from_raw(b))
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.n;
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            let col = self.solve(&Vector::basis(n, j)).expect("matching length");
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

/// Solves `m v = rhs` by LU with partial pivoting. See [`LuFactors::new`].
pub fn lu_solve<T: Scalar>(m: &Matrix<T>, rhs: &Vector<T>) -> Result<Vector<T>, LinalgError> {
    if m.is_square() && rhs.len() != m.rows {
        return Err(LinalgError::DimensionMismatch {
            expected: m.rows,
            got: rhs.len(),
        });
    }
    LuFactors::new(m)?.solve(rhs)
}

/// Estimates the spectral norm of `m` by normalized power iteration,
/// returning `‖m u‖` for the final unit iterate `u`.
///
/// Returns zero when an iterate is annihilated by `m`.
pub fn power_norm_estimate<T: Scalar>(
    m: &Matrix<T>,
    iterations: usize,
    start: &Vector<T>,
) -> Result<T, LinalgError> {
    if start.len() != m.cols {
        return Err(LinalgError::DimensionMismatch {
            expected: m.cols,
            got: start.len(),
        });
    }
    let n0 = start.norm();
    if n0 == T::zero() {
        return Err(LinalgError::ZeroStart);
    }
    let mut u = start.scale(T::one() / n0);
    let mut w = m.matvec(&u);
    for _ in 0..iterations {
        let wn = w.norm();
        if wn == T::zero() {
            return Ok(T::zero());
        }
        if m.is_square() {
            u = w.scale(T::one() / wn);
        } else {
            // rectangular: iterate on mᵗm
            let back = m.matvec_t(&w);
            let bn = back.norm();
            if bn == T::zero() {
                return Ok(T::zero());
            }
            u = back.scale(T::one() / bn);
        }
        w = m.matvec(&u);
    }
    Ok(w.norm())
}

/// Central-difference gradient with a uniform step `h`.
pub fn finite_diff_gradient<T: Scalar>(
    mut f: impl FnMut(&Vector<T>) -> T,
    z: &Vector<T>,
    h: T,
) -> Vector<T> {
    finite_diff_gradient_steps(&mut f, z, |_| h)
}

/// Central-difference gradient with per-coordinate step `rel * (1 + |z_i|)`.
pub fn finite_diff_gradient_scaled<T: Scalar>(
    mut f: impl FnMut(&Vector<T>) -> T,
    z: &Vector<T>,
    rel: T,
) -> Vector<T> {
    finite_diff_gradient_steps(&mut f, z, |zi| rel * (T::one() + zi.abs()))
}

fn finite_diff_gradient_steps<T: Scalar>(
    f: &mut impl FnMut(&Vector<T>) -> T,
    z: &Vector<T>,
    step: impl Fn(T) -> T,
) -> Vector<T> {
    let mut probe = z.clone();
    Vector::from_fn(z.len(), |i| {
        let h = step(z[i]);
        probe[i] = z[i] + h;
        let fp = f(&probe);
        probe[i] = z[i] - h;
        let fm = f(&probe);
        probe[i] = z[i];
        (fp - fm) / (h + h)
    })
}

/// Central-difference Jacobian of a vector field; row `i` holds `∂f_i/∂z`.
/// Steps are `rel * (1 + |z_j|)`.
pub fn finite_diff_jacobian_scaled<T: Scalar>(
    mut f: impl FnMut(&Vector<T>) -> Vector<T>,
    z: &Vector<T>,
    rel: T,
) -> Matrix<T> {
    let n = z.len();
    let mut probe = z.clone();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let h = rel * (T::one() + z[j].abs());
        probe[j] = z[j] + h;
        let fp = f(&probe);
        probe[j] = z[j] - h;
        let fm = f(&probe);
        probe[j] = z[j];
        columns.push(fp.sub(&fm).scale(T::one() / (h + h)));
    }
    let m = columns.first().map_or(0, Vector::len);
    Matrix::from_fn(m, n, |i, j| columns[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lu_identity() {
        let v = lu_solve(&Matrix::<f64>::identity(3), &Vector::from([1.0, 2.0, 3.0])).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn lu_two_by_two() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let v = lu_solve(&m, &Vector::from([0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn lu_singular() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let err = lu_solve(&m, &Vector::from([3.0, -2.0])).unwrap_err();
        assert!(matches!(err, LinalgError::SingularMatrix { column: 1, .. }));
        assert!(matches!(
            lu_solve(&Matrix::<f64>::zeros(2, 2), &Vector::zeros(2)),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn lu_shape_errors() {
        let m = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            lu_solve(&m, &Vector::zeros(2)),
            Err(LinalgError::NotSquare { .. })
        ));
        let m = Matrix::<f64>::identity(2);
        assert!(matches!(
            lu_solve(&m, &Vector::zeros(3)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lu_needs_pivoting() {
        let m = Matrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 0.0, 0.0], &[3.0, 1.0, 4.0]]);
        let rhs = Vector::from([1.0, 2.0, 3.0]);
        let v = lu_solve(&m, &rhs).unwrap();
        let res = m.matvec(&v).sub(&rhs).norm_inf();
        assert!(res < 1e-14, "residual {res}");
    }

    #[test]
    fn lu_inverse() {
        let m = Matrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 0.0, 0.0], &[3.0, 1.0, 4.0]]);
        let inv = LuFactors::new(&m).unwrap().inverse();
        let err = m.matmul(&inv).sub(&Matrix::identity(3)).norm_inf();
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert_eq!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite(1))
        );
        assert!(Matrix::new(1, 2, vec![f64::INFINITY, 0.0]).is_err());
        assert!(Matrix::<f64>::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn power_iteration_examples() {
        let d = Matrix::from_diag(&Vector::from([2.0, 1.0]));
        let est = power_norm_estimate(&d, 50, &Vector::from([1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(est, 2.0, epsilon = 1e-6);

        let id = Matrix::<f64>::identity(4);
        let est = power_norm_estimate(&id, 3, &Vector::from([0.3, -1.0, 2.0, 0.1])).unwrap();
        assert_abs_diff_eq!(est, 1.0, epsilon = 1e-15);

        let swap = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let est = power_norm_estimate(&swap, 50, &Vector::from([1.0, 0.5])).unwrap();
        assert_abs_diff_eq!(est, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn power_iteration_degenerate() {
        let nil = Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        // e_0 -> 0 immediately
        assert_eq!(
            power_norm_estimate(&nil, 5, &Vector::from([1.0, 0.0])).unwrap(),
            0.0
        );
        assert_eq!(
            power_norm_estimate(&nil, 5, &Vector::<f64>::zeros(2)),
            Err(LinalgError::ZeroStart)
        );
    }

    #[test]
    fn finite_differences_quadratics() {
        let g = finite_diff_gradient(
            |z: &Vector<f64>| 0.5 * z.dot(z),
            &Vector::from([3.0, 4.0]),
            1e-5,
        );
        assert_abs_diff_eq!(g[0], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 4.0, epsilon = 1e-8);

        let g = finite_diff_gradient(
            |z: &Vector<f64>| z[0] * z[1],
            &Vector::from([2.0, 5.0]),
            1e-5,
        );
        assert_abs_diff_eq!(g[0], 5.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn finite_difference_jacobian_of_linear_map() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 0.0], &[-1.0, 0.5, 3.0]]);
        let jac =
            finite_diff_jacobian_scaled(|z| a.matvec(z), &Vector::from([0.2, -1.0, 4.0]), 1e-5);
        assert_eq!((jac.rows(), jac.cols()), (2, 3));
        for (x, y) in jac.as_slice().iter().zip(a.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn matmul_and_transpose() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let b = Matrix::from_rows(&[&[1.0, 0.0, -1.0], &[2.0, 1.0, 0.0]]);
        let ab = a.matmul(&b);
        assert_eq!(
            ab.as_slice(),
            &[5.0, 2.0, -1.0, 11.0, 4.0, -3.0, 17.0, 6.0, -5.0]
        );
        let v = Vector::from([1.0, -1.0, 2.0]);
        assert_eq!(a.matvec_t(&v), a.transpose().matvec(&v));
    }

    #[test]
    fn works_in_single_precision() {
        let m = Matrix::from_rows(&[&[4.0f32, 1.0], &[1.0, 3.0]]);
        let v = lu_solve(&m, &Vector::from([1.0f32, 2.0])).unwrap();
        assert!(m.matvec(&v).sub(&Vector::from([1.0, 2.0])).norm_inf() < 1e-6);
    }
}
