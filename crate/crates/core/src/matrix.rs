//! Dense real matrices and the matrix-calculus primitives the integrator
//! relies on: Kronecker products, `vec`, Frobenius and spectral norms, and
//! small dense linear and Sylvester solves.
//!
//! Storage is row-major throughout the crate. `vec` always stacks columns,
//! independent of the storage order.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by matrix construction and the dense solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix data has {len} entries, expected {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is singular to working precision (pivot column {column})")]
    Singular { column: usize },
    #[error("power iteration did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}

/// A dense `rows x cols` real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = MatrixError;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        let m = Matrix::new(raw.rows, raw.cols, raw.data)?;
        if !m.is_finite() {
            return Err(MatrixError::NonFinite);
        }
        Ok(m)
    }
}

impl From<Matrix> for RawMatrix {
    fn from(m: Matrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl Matrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::Empty);
        }
        if data.len() != rows * cols {
            return Err(MatrixError::BadShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    ///
    /// Panics on ragged or empty input; intended for literals.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        assert!(!rows.is_empty(), "from_rows: no rows");
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "from_rows: ragged rows");
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data).expect("from_rows: empty row")
    }

    pub fn column(values: &[f64]) -> Self {
        Matrix::new(values.len(), 1, values.to_vec()).expect("column: empty")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s * other`, the workhorse of Taylor-polynomial evaluation.
    pub fn add_scaled(&self, other: &Matrix, s: f64) -> Matrix {
        self.assert_same_dims(other, "add_scaled");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn try_matmul(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != other.rows {
            return Err(self.mismatch(other, "matmul"));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        self.try_matmul(other).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Kronecker product: block `(i, j)` of the result is `self[(i, j)] * other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let (m, n) = self.dims();
        let (r, s) = other.dims();
        let mut out = Matrix::zeros(m * r, n * s);
        for i in 0..m {
            for j in 0..n {
                let a = self[(i, j)];
                for p in 0..r {
                    for q in 0..s {
                        out[(i * r + p, j * s + q)] = a * other[(p, q)];
                    }
                }
            }
        }
        out
    }

    /// Stacks the columns of the matrix into a single column vector.
    pub fn vec(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)]);
            }
        }
        Matrix::new(self.data.len(), 1, data).expect("vec of non-empty matrix")
    }

    /// Inverse of [`Matrix::vec`]: reshapes a column vector into `rows x cols`.
    pub fn unvec(v: &Matrix, rows: usize, cols: usize) -> Result<Matrix, MatrixError> {
        if v.cols != 1 || v.rows != rows * cols {
            return Err(MatrixError::DimensionMismatch {
                op: "unvec",
                left_rows: v.rows,
                left_cols: v.cols,
                right_rows: rows * cols,
                right_cols: 1,
            });
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| v.data[j * rows + i]))
    }

    pub fn hstack(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.rows != other.rows {
            return Err(self.mismatch(other, "hstack"));
        }
        Ok(Matrix::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    pub fn vstack(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != other.cols {
            return Err(self.mismatch(other, "vstack"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix::new(self.rows + other.rows, self.cols, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral norm (largest singular value) via power iteration on `AᵀA`.
    pub fn two_norm(&self) -> Result<f64, MatrixError> {
        const TOL: f64 = 1e-10;
        const MAX_ITER: usize = 10_000;

        let gram = self.transpose().matmul(self);
        if gram.max_abs() == 0.0 {
            return Ok(0.0);
        }
        let n = gram.rows;
        let ones = Matrix::column(&vec![1.0; n]);
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let random = Matrix::column(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());

        for seed in [ones, random] {
            match power_iteration(&gram, seed, TOL, MAX_ITER) {
                PowerOutcome::Converged(lambda) => return Ok(lambda.max(0.0).sqrt()),
                PowerOutcome::Stalled => continue,
                PowerOutcome::IterationLimit => {
                    return Err(MatrixError::NotConverged {
                        iterations: MAX_ITER,
                    })
                }
            }
        }
        Err(MatrixError::NotConverged {
            iterations: MAX_ITER,
        })
    }

    fn assert_same_dims(&self, other: &Matrix, op: &'static str) {
        if self.dims() != other.dims() {
            panic!("{}", self.mismatch(other, op));
        }
    }

    fn mismatch(&self, other: &Matrix, op: &'static str) -> MatrixError {
        MatrixError::DimensionMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: other.rows,
            right_cols: other.cols,
        }
    }
}

enum PowerOutcome {
    Converged(f64),
    Stalled,
    IterationLimit,
}

fn power_iteration(gram: &Matrix, seed: Matrix, tol: f64, max_iter: usize) -> PowerOutcome {
    let mut v = seed;
    let norm = v.frobenius_norm();
    if norm == 0.0 {
        return PowerOutcome::Stalled;
    }
    v = v.scale(1.0 / norm);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = gram.matmul(&v);
        let wn = w.frobenius_norm();
        // seed orthogonal to the range of the Gram matrix
        if wn <= f64::EPSILON * gram.max_abs() {
            return PowerOutcome::Stalled;
        }
        // Rayleigh quotient vᵀ(AᵀA)v with |v| = 1
        let next: f64 = v.data.iter().zip(&w.data).map(|(a, b)| a * b).sum();
        v = w.scale(1.0 / wn);
        if (next - lambda).abs() <= tol * next.abs() {
            return PowerOutcome::Converged(next);
        }
        lambda = next;
    }
    PowerOutcome::IterationLimit
}

/// Solves `A x = b` by LU factorisation with partial pivoting.
///
/// `b` may have several columns; each is solved independently.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix, MatrixError> {
    let n = a.rows;
    if a.cols != n || b.rows != n {
        return Err(a.mismatch(b, "solve_linear"));
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= f64::EPSILON * scale * n as f64 {
            return Err(MatrixError::Singular { column: col });
        }
        if pivot_row != col {
            for j in 0..n {
                lu.data.swap(col * n + j, pivot_row * n + j);
            }
            perm.swap(col, pivot_row);
        }
        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            lu[(r, col)] = factor;
            if factor != 0.0 {
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu[(r, j)] -= factor * v;
                }
            }
        }
    }

    let mut x = Matrix::zeros(n, b.cols);
    for c in 0..b.cols {
        let mut y: Vec<f64> = perm.iter().map(|&p| b[(p, c)]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= lu[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= lu[(i, j)] * y[j];
            }
            y[i] /= lu[(i, i)];
        }
        for i in 0..n {
            x[(i, c)] = y[i];
        }
    }
    if !x.is_finite() {
        return Err(MatrixError::NonFinite);
    }
    Ok(x)
}

/// Solves the Sylvester equation `P X + X Q = R` through the linearisation
/// `(I_q ⊗ P + Qᵀ ⊗ I_p) vec X = vec R`.
pub fn solve_sylvester(p: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix, MatrixError> {
    let (pr, pc) = p.dims();
    let (qr, qc) = q.dims();
    if pr != pc {
        return Err(p.mismatch(p, "solve_sylvester (P square)"));
    }
    if qr != qc {
        return Err(q.mismatch(q, "solve_sylvester (Q square)"));
    }
    if r.dims() != (pr, qr) {
        return Err(MatrixError::DimensionMismatch {
            op: "solve_sylvester (R)",
            left_rows: r.rows,
            left_cols: r.cols,
            right_rows: pr,
            right_cols: qr,
        });
    }
    let system = Matrix::identity(qr).kron(p) + q.transpose().kron(&Matrix::identity(pr));
    let x = solve_linear(&system, &r.vec())?;
    Matrix::unvec(&x, pr, qr)
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}{:?}", self.rows, self.cols, self.to_rows())
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.data.chunks(self.cols).enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6e}")).collect();
            write!(f, "[{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

macro_rules! elementwise {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Matrix> for &Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                self.assert_same_dims(rhs, stringify!($method));
                Matrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $trait<Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: Matrix) -> Matrix {
                &self $op &rhs
            }
        }
        impl $trait<&Matrix> for Matrix {
            type Output = Matrix;
            fn $method(self, rhs: &Matrix) -> Matrix {
                &self $op rhs
            }
        }
        impl $trait<Matrix> for &Matrix {
            type Output = Matrix;
            fn $method(self, rhs: Matrix) -> Matrix {
                self $op &rhs
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.assert_same_dims(rhs, "add_assign");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        self.assert_same_dims(rhs, "sub_assign");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
    }
}

impl Mul<&Matrix> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Mul<Matrix> for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        self.matmul(&rhs)
    }
}

impl Mul<&Matrix> for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Mul<Matrix> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        self.matmul(&rhs)
    }
}

impl Mul<f64> for &Matrix {
    type Output = Matrix;
    fn mul(self, s: f64) -> Matrix {
        self.scale(s)
    }
}

impl Mul<f64> for Matrix {
    type Output = Matrix;
    fn mul(self, s: f64) -> Matrix {
        self.scale(s)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn kron_identity_is_block_diagonal() {
        let b = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let k = Matrix::identity(2).kron(&b);
        let expected = Matrix::from_rows(&[
            [1.0, 2.0, 0.0, 0.0],
            [3.0, 4.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 2.0],
            [0.0, 0.0, 3.0, 4.0],
        ]);
        assert_eq!(k, expected);
    }

    #[test]
    fn kron_scalar_block() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let k = a.kron(&Matrix::from_rows(&[[5.0]]));
        assert_eq!(k, Matrix::from_rows(&[[5.0, 0.0], [0.0, 0.0]]));
    }

    #[test]
    fn kron_vec_transpose_with_identity() {
        let f = Matrix::column(&[0.7, -1.3]);
        let k = f.vec().transpose().kron(&Matrix::identity(2));
        assert_eq!(
            k,
            Matrix::from_rows(&[[0.7, 0.0, -1.3, 0.0], [0.0, 0.7, 0.0, -1.3]])
        );
    }

    #[test]
    fn vec_stacks_columns() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(a.vec().as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        let c = Matrix::column(&[2.0, std::f64::consts::FRAC_PI_2]);
        assert_eq!(c.vec(), c);
        assert_eq!(Matrix::unvec(&a.vec(), 2, 2).unwrap(), a);
    }

    #[test]
    fn frobenius_examples() {
        assert!(close(Matrix::identity(2).frobenius_norm(), 2f64.sqrt(), 1e-15));
        assert_eq!(Matrix::from_rows(&[[3.0, 4.0]]).frobenius_norm(), 5.0);
        let d = Matrix::from_rows(&[[-1.0, -0.01], [0.1, 0.1]]);
        assert!(close(d.frobenius_norm(), 1.0100, 5e-5));
    }

    #[test]
    fn two_norm_examples() {
        assert!(close(Matrix::identity(3).two_norm().unwrap(), 1.0, 1e-12));
        let m = Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0]]);
        assert!(close(m.two_norm().unwrap(), 3.0, 1e-12));
        let stacked = Matrix::identity(2)
            .vstack(&Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]))
            .unwrap();
        assert!(close(stacked.two_norm().unwrap(), 2f64.sqrt(), 1e-9));
        assert_eq!(Matrix::zeros(2, 3).two_norm().unwrap(), 0.0);
    }

    #[test]
    fn two_norm_falls_back_when_ones_seed_is_orthogonal() {
        // AᵀA annihilates the all-ones vector
        let m = Matrix::from_rows(&[[1.0, -1.0]]);
        assert!(close(m.two_norm().unwrap(), 2f64.sqrt(), 1e-9));
    }

    #[test]
    fn solve_linear_examples() {
        let b = Matrix::column(&[1.5, -2.0, 7.0]);
        assert_eq!(solve_linear(&Matrix::identity(3), &b).unwrap(), b);
        let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]);
        let x = solve_linear(&a, &Matrix::column(&[2.0, 4.0])).unwrap();
        assert_eq!(x, Matrix::column(&[1.0, 1.0]));
    }

    #[test]
    fn solve_linear_random_residual() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let a = Matrix::from_fn(5, 5, |i, j| {
                rng.gen_range(-1.0..1.0) + if i == j { 5.0 } else { 0.0 }
            });
            let b = Matrix::from_fn(5, 1, |_, _| rng.gen_range(-10.0..10.0));
            let x = solve_linear(&a, &b).unwrap();
            let residual = (&a * &x - &b).frobenius_norm();
            assert!(residual <= 1e-10 * (1.0 + b.frobenius_norm()));
        }
    }

    #[test]
    fn solve_linear_rejects_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        let err = solve_linear(&a, &Matrix::column(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, MatrixError::Singular { .. }));
    }

    #[test]
    fn sylvester_trivial_cases() {
        let r = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let x = solve_sylvester(&Matrix::identity(2), &Matrix::zeros(3, 3), &r).unwrap();
        assert!((&x - &r).max_abs() < 1e-14);
        let x = solve_sylvester(&Matrix::zeros(2, 2), &Matrix::identity(3), &r).unwrap();
        assert!((&x - &r).max_abs() < 1e-14);
    }

    #[test]
    fn sylvester_agrees_with_fixed_point_iteration() {
        // P = I + E, Q = F with E, F small: X = R - E X - X F contracts.
        let e = Matrix::from_rows(&[[0.1, -0.05], [0.2, 0.03]]);
        let f = Matrix::from_rows(&[[-0.04, 0.1], [0.0, 0.15]]);
        let r = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
        let p = &Matrix::identity(2) + &e;
        let direct = solve_sylvester(&p, &f, &r).unwrap();

        let mut x = Matrix::zeros(2, 2);
        for _ in 0..500 {
            x = &r - &(&e * &x) - &x * &f;
        }
        assert!((&direct - &x).max_abs() < 1e-10);
        let residual = &p * &direct + &direct * &f - &r;
        assert!(residual.frobenius_norm() <= 1e-9 * (1.0 + r.frobenius_norm()));
    }

    #[test]
    fn sylvester_singular_is_reported() {
        // eigenvalue 1 of P meets eigenvalue -1 of Q
        let p = Matrix::identity(2);
        let q = Matrix::identity(2).scale(-1.0);
        let r = Matrix::identity(2);
        assert!(matches!(
            solve_sylvester(&p, &q, &r),
            Err(MatrixError::Singular { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Matrix::new(2, 2, vec![1.0]),
            Err(MatrixError::BadShape { .. })
        ));
        assert!(matches!(Matrix::new(0, 2, vec![]), Err(MatrixError::Empty)));
        let a = Matrix::zeros(2, 3);
        assert!(a.try_matmul(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let a = Matrix::from_rows(&[[1.0, 0.1 + 0.2], [1e-300, -7.25]]);
        let json = serde_json::to_string(&a).unwrap();
        let back: Matrix = serde_json::from_str(&json).unwrap();
        assert_eq!(a, back);
        assert!(serde_json::from_str::<Matrix>(r#"{"rows":2,"cols":2,"data":[1]}"#).is_err());
    }
}
