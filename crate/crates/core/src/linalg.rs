//! Dense row-major matrices, a cyclic Jacobi eigensolver for symmetric
//! matrices, and condition numbers.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::error::{Error, Result};

/// Eigenvalues below `-PSD_TOLERANCE * lambda_max` mean the matrix is not PSD.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// `lambda_min <= SINGULAR_TOLERANCE * lambda_max` yields an infinite condition number.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;
/// Inputs whose asymmetry exceeds this (relative to the Frobenius norm) are rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Dense matrix stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| 0.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), values.len(), |i, j| {
            if i == j {
                values[i]
            } else {
                0.0
            }
        })
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|A_ij - A_ji|`; zero for non-square matrices is meaningless,
    /// so those return infinity.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// `A Bᵀ`, the workhorse for Gram-style products.
    pub fn mul_transpose(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot form A Bᵀ for {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix::from_fn(self.rows, other.rows, |i, j| {
            dot(self.row(i), other.row(j))
        }))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Standard matrix product `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    if let Some(pos) = out.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / out.cols,
            col: pos % out.cols,
        });
    }
    Ok(out)
}

/// Eigenvalues in descending order with the derived extremes and condition number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `lambda_max / lambda_min`, or `+inf` when `lambda_min` is numerically zero.
    #[serde(serialize_with = "serialize_kappa")]
    pub kappa: f64,
}

fn serialize_kappa<S: serde::Serializer>(kappa: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if kappa.is_finite() {
        s.serialize_f64(*kappa)
    } else {
        s.serialize_str("inf")
    }
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        assert!(!eigenvalues.is_empty());
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let lambda_max = eigenvalues[0];
        let lambda_min = *eigenvalues.last().unwrap();
        let kappa = kappa_from_extremes(lambda_max, lambda_min);
        Self {
            eigenvalues,
            lambda_max,
            lambda_min,
            kappa,
        }
    }
}

fn kappa_from_extremes(lambda_max: f64, lambda_min: f64) -> f64 {
    if lambda_max > 0.0 && lambda_min > SINGULAR_TOLERANCE * lambda_max {
        lambda_max / lambda_min
    } else {
        f64::INFINITY
    }
}

/// Full eigendecomposition `A = Q diag(values) Qᵀ`; column `k` of `vectors`
/// pairs with `values[k]`, sorted descending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                .sum()
        })
    }
}

fn check_symmetric_input(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if let Some(pos) = a.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / a.cols,
            col: pos % a.cols,
        });
    }
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (max |A_ij - A_ji| = {asym:e})"
        )));
    }
    Ok(a.symmetrized())
}

/// Cyclic Jacobi sweeps in fixed row order. Returns the diagonal after
/// convergence and, when requested, the accumulated rotations.
fn jacobi(mut a: Matrix, want_vectors: bool) -> (Vec<f64>, Option<Matrix>) {
    let n = a.rows;
    let mut v = want_vectors.then(|| Matrix::identity(n));
    let norm_a = a.frobenius_norm();
    if norm_a == 0.0 || n == 1 {
        return ((0..n).map(|i| a[(i, i)]).collect(), v);
    }
    let target = JACOBI_OFF_DIAGONAL_TOLERANCE * norm_a;
    let skip = 1e-14 * norm_a / n as f64;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= skip {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// `A <- Jᵀ A J` for the plane rotation in (p, q).
fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    let (head, tail) = a.data.split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (apk, aqk) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let x = *apk;
        let y = *aqk;
        *apk = c * x - s * y;
        *aqk = s * x + c * y;
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let mut sum = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Eigenvalues of the symmetrized input, descending, with κ.
pub fn symmetric_eig(a: &Matrix) -> Result<SpectrumReport> {
    let sym = check_symmetric_input(a)?;
    let (values, _) = jacobi(sym, false);
    Ok(SpectrumReport::from_eigenvalues(values))
}

/// Eigenvalues and orthonormal eigenvectors of the symmetrized input.
pub fn symmetric_eigen_decompose(a: &Matrix) -> Result<SymmetricEigen> {
    let sym = check_symmetric_input(a)?;
    let n = sym.rows;
    let (values, vectors) = jacobi(sym, true);
    let vectors = vectors.expect("vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    Ok(SymmetricEigen {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors: Matrix::from_fn(n, n, |i, j| vectors[(i, order[j])]),
    })
}

/// Spectrum of a PSD matrix with small negative eigenvalues clamped to zero.
pub fn psd_spectrum(a: &Matrix) -> Result<SpectrumReport> {
    let report = symmetric_eig(a)?;
    let tolerance = PSD_TOLERANCE * report.lambda_max.abs();
    if report.lambda_min < -tolerance {
        return Err(Error::NotPositiveSemidefinite {
            eigenvalue: report.lambda_min,
            tolerance,
        });
    }
    let clamped = report.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    Ok(SpectrumReport::from_eigenvalues(clamped))
}

/// `lambda_max / lambda_min` of a symmetric PSD matrix.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    Ok(psd_spectrum(a)?.kappa)
}
