//! Small dense fp64 vectors and matrices.
//!
//! Everything here is sized for Jacobians of tiny networks (at most a few
//! dozen rows), so the routines are plain loops over row-major storage.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, JacError, Result};

/// Pivots smaller than this in magnitude make a matrix singular for
/// [`Matrix::lu_inverse`].
pub const SINGULAR_PIVOT: f64 = 1e-12;

/// Tolerance on `|m_ij - m_ji|` accepted by [`Matrix::cholesky_check`],
/// relative to `max(1, max |m_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense column vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(JacError::InvalidArgument("vector must be non-empty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(JacError::NonFinite("vector"));
        }
        Ok(Self { data })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(data.to_vec())
    }

    /// 1-element vector.
    pub fn scalar(v: f64) -> Self {
        Self { data: vec![v] }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![0.0; dim],
        }
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        check_dim("vector add", self.dim(), other.dim())?;
        Ok(Self::from_vec_unchecked(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_dim("vector sub", self.dim(), other.dim())?;
        Ok(Self::from_vec_unchecked(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Vector {
        Self::from_vec_unchecked(self.data.iter().map(|v| v * s).collect())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim("dot", self.dim(), other.dim())?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = JacError;

    fn try_from(data: Vec<f64>) -> Result<Self> {
        Self::new(data)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.data
    }
}

/// A dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(JacError::InvalidArgument(
                "matrix dimensions must be positive".into(),
            ));
        }
        check_dim("matrix storage", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(JacError::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim("matrix row", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
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

    /// Row-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * s).collect(),
        )
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("matrix sub (rows)", self.rows, other.rows)?;
        check_dim("matrix sub (cols)", self.cols, other.cols)?;
        Ok(Matrix::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Frobenius inner product `sum_ij a_ij b_ij`.
    pub fn frobenius_dot(&self, other: &Matrix) -> Result<f64> {
        check_dim("frobenius (rows)", self.rows, other.rows)?;
        check_dim("frobenius (cols)", self.cols, other.cols)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        check_dim("matvec", self.cols, v.dim())?;
        let x = v.as_slice();
        let out = (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Vector::from_vec_unchecked(out))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("matmul", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &Vector, v: &Vector) -> Matrix {
        let mut out = Matrix::zeros(u.dim(), v.dim());
        for (i, a) in u.as_slice().iter().enumerate() {
            for (j, b) in v.as_slice().iter().enumerate() {
                out.data[i * v.dim() + j] = a * b;
            }
        }
        out
    }

    fn require_square(&self, op: &'static str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(JacError::DimensionMismatch {
                op,
                expected: self.rows,
                found: self.cols,
            })
        }
    }

    /// Inverse by LU factorization with partial pivoting.
    pub fn lu_inverse(&self) -> Result<Matrix> {
        self.require_square("lu_inverse")?;
        let lu = Lu::factor(self);
        if let Some(pivot) = lu.smallest_pivot().filter(|p| p.abs() < SINGULAR_PIVOT) {
            return Err(JacError::Singular { pivot });
        }
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            lu.solve_in_place(&mut col);
            for (i, &c) in col.iter().enumerate() {
                inv.data[i * n + j] = c;
            }
        }
        Ok(inv)
    }

    /// Solves `self · x = b`.
    pub fn lu_solve(&self, b: &Vector) -> Result<Vector> {
        self.require_square("lu_solve")?;
        check_dim("lu_solve", self.rows, b.dim())?;
        let lu = Lu::factor(self);
        if let Some(pivot) = lu.smallest_pivot().filter(|p| p.abs() < SINGULAR_PIVOT) {
            return Err(JacError::Singular { pivot });
        }
        let mut x = b.as_slice().to_vec();
        lu.solve_in_place(&mut x);
        Ok(Vector::from_vec_unchecked(x))
    }

    /// Product of the LU pivots times the permutation sign. Singular input
    /// gives 0.0 (or a roundoff-sized value).
    pub fn determinant(&self) -> Result<f64> {
        self.require_square("determinant")?;
        let lu = Lu::factor(self);
        let n = self.rows;
        let mut det = lu.sign;
        for i in 0..n {
            det *= lu.data[i * n + i];
        }
        Ok(det)
    }

    /// True iff `self - floor·I` admits a Cholesky factorization, i.e. every
    /// eigenvalue of `self` is at least `floor`. Pivots within roundoff of zero
    /// count as non-negative.
    pub fn cholesky_check(&self, floor: f64) -> Result<bool> {
        self.require_square("cholesky_check")?;
        let n = self.rows;
        let scale = self.max_abs().max(1.0);
        let mut asymmetry: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                asymmetry = asymmetry.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(JacError::NotSymmetric { asymmetry });
        }

        let roundoff = (n as f64) * f64::EPSILON * (scale + floor.abs());
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j) - floor;
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d < -roundoff || d.is_nan() {
                return Ok(false);
            }
            let ljj = d.max(0.0).sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = if ljj > 0.0 { s / ljj } else { 0.0 };
            }
        }
        Ok(true)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

/// Packed LU factors of `P·A`.
struct Lu {
    n: usize,
    data: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn factor(m: &Matrix) -> Lu {
        let n = m.rows;
        let mut data = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&a, &b| data[a * n + k].abs().total_cmp(&data[b * n + k].abs()))
                .unwrap_or(k);
            if p != k {
                for j in 0..n {
                    data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = data[k * n + k];
            if pivot == 0.0 {
                continue;
            }
            for i in (k + 1)..n {
                let factor = data[i * n + k] / pivot;
                data[i * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        data[i * n + j] -= factor * data[k * n + j];
                    }
                }
            }
        }
        Lu {
            n,
            data,
            perm,
            sign,
        }
    }

    fn smallest_pivot(&self) -> Option<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n + i])
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let permuted: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let row = &self.data[i * n..i * n + i];
            b[i] = row.iter().zip(&b[..i]).fold(b[i], |s, (l, x)| s - l * x);
        }
        for i in (0..n).rev() {
            let row = &self.data[i * n + i + 1..(i + 1) * n];
            let s = row
                .iter()
                .zip(&b[i + 1..])
                .fold(b[i], |s, (u, x)| s - u * x);
            b[i] = s / self.data[i * n + i];
        }
    }
}
