//! Small dense linear algebra.
//!
//! [`Matrix`] is generic over a [`Scalar`] so the Fock-space constructions can
//! run both in `f64` and in exact rational arithmetic. The floating-point
//! specific pieces (matrix exponential, LU solve, sparse action, adaptive
//! Dormand-Prince integration) live alongside.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};
use thiserror::Error;

/// Ring elements the generic matrix code works with.
pub trait Scalar: Num + Clone + Neg<Output = Self> + Debug + PartialEq {
    /// Exact conversion of a finite `f64`.
    fn from_f64(x: f64) -> Self;
    fn from_u64(n: u64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        // every finite double is a dyadic rational
        BigRational::from_float(x).expect("finite rate coefficient")
    }
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
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
            m.data[i * n + i] = T::one();
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

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().cloned()).collect(),
        }
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = v.clone();
        }
        m
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        let idx = i * self.cols + j;
        let cur = std::mem::replace(&mut self.data[idx], T::zero());
        self.data[idx] = cur + v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// Matrix product, skipping zero entries of `self`.
    pub fn matmul(&self, other: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let idx = i * out.cols + j;
                    let cur = std::mem::replace(&mut out.data[idx], T::zero());
                    out.data[idx] = cur + a.clone() * b.clone();
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, _)| !a.is_zero())
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }

    /// Row vector times matrix, `v^T M`.
    pub fn vecmat(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "vecmat shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (j, a) in self.row(i).iter().enumerate() {
                if !a.is_zero() {
                    let cur = std::mem::replace(&mut out[j], T::zero());
                    out[j] = cur + vi.clone() * a.clone();
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix<T>) -> Matrix<T> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Matrix<T>) -> Matrix<T> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn scale(&self, s: &T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.clone() * s.clone()).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix<T>, f: impl Fn(&T, &T) -> T) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Matrix<T> {
        assert!(self.is_square());
        (0..k).fold(Matrix::identity(self.rows), |acc, _| acc.matmul(self))
    }

    /// Nonzero entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if !v.is_zero() {
                    out.push((i, j, v.clone()));
                }
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|x| x.to_f64())
    }

    /// Column sums.
    pub fn column_sums(&self) -> Vec<T> {
        let ones = vec![T::one(); self.rows];
        self.vecmat(&ones)
    }
}

impl Matrix<f64> {
    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix<f64>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(self)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("ODE integration did not reach t = {target} within {max_steps} steps")]
    TooManySteps { target: f64, max_steps: usize },
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
}

/// Solve `A X = B` by LU with partial pivoting.
pub fn lu_solve(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<Matrix<f64>, LinalgError> {
    let n = a.rows;
    assert!(a.is_square() && b.rows == n);
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = b.cols;
    let scale = lu.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, lu.get(i, k).abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= f64::EPSILON * scale * n as f64 || pmax == 0.0 {
            return Err(LinalgError::Singular);
        }
        if piv != k {
            for j in 0..n {
                lu.data.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                x.data.swap(k * m + j, piv * m + j);
            }
        }
        let pivot = *lu.get(k, k);
        for i in k + 1..n {
            let f = lu.get(i, k) / pivot;
            if f == 0.0 {
                continue;
            }
            lu.set(i, k, f);
            for j in k + 1..n {
                let v = lu.get(i, j) - f * lu.get(k, j);
                lu.set(i, j, v);
            }
            for j in 0..m {
                let v = x.get(i, j) - f * x.get(k, j);
                x.set(i, j, v);
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = *lu.get(k, k);
        for j in 0..m {
            let mut s = *x.get(k, j);
            for i in k + 1..n {
                s -= lu.get(k, i) * x.get(i, j);
            }
            x.set(k, j, s / pivot);
        }
    }
    Ok(x)
}

/// Padé(13) coefficients for scaling-and-squaring (Higham 2005).
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371_920_351_148_152;

/// Matrix exponential by scaling and squaring with a Padé(13) approximant.
pub fn expm(a: &Matrix<f64>) -> Result<Matrix<f64>, LinalgError> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.rows;
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = a.norm1();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(&0.5_f64.powi(s));
    let b = &PADE13;
    let id = Matrix::identity(n);
    let a2 = scaled.matmul(&scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let lin = |c: [f64; 4]| -> Matrix<f64> {
        a6.scale(&c[0])
            .add(&a4.scale(&c[1]))
            .add(&a2.scale(&c[2]))
            .add(&id.scale(&c[3]))
    };
    let u_inner = a6
        .matmul(&a6.scale(&b[13]).add(&a4.scale(&b[11])).add(&a2.scale(&b[9])))
        .add(&lin([b[7], b[5], b[3], b[1]]));
    let u = scaled.matmul(&u_inner);
    let v = a6
        .matmul(&a6.scale(&b[12]).add(&a4.scale(&b[10])).add(&a2.scale(&b[8])))
        .add(&lin([b[6], b[4], b[2], b[0]]));
    let mut r = lu_solve(&v.sub(&u), &v.add(&u))?;
    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}

/// Compressed sparse row matrix for repeated matrix-vector products.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n_rows: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &Matrix<f64>) -> Self {
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.rows {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self {
            n_rows: m.rows,
            row_start,
            cols,
            vals,
        }
    }

    #[inline]
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n_rows {
            let mut s = 0.0;
            for k in self.row_start[i]..self.row_start[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.apply_into(x, &mut y);
        y
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// Tolerances for [`integrate_linear`].
#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-14,
            max_steps: 5_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = A y` from 0 to `t` with adaptive Dormand-Prince 5(4).
///
/// Explicit Runge-Kutta stages are linear combinations of `A y`, so any linear
/// invariant `w^T A = 0` (probability conservation) is kept to roundoff
/// independently of the tolerance.
pub fn integrate_linear(
    a: &SparseMatrix,
    y0: &[f64],
    t: f64,
    tol: OdeTolerance,
) -> Result<Vec<f64>, LinalgError> {
    let n = y0.len();
    let mut y = y0.to_vec();
    if t <= 0.0 {
        return Ok(y);
    }
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    a.apply_into(&y, &mut k[0]);
    let y_norm = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let f_norm = k[0].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut h = if f_norm > 0.0 {
        (0.01 * y_norm / f_norm).min(t)
    } else {
        t
    };
    let mut time = 0.0;
    let mut steps = 0;
    while time < t {
        if steps >= tol.max_steps {
            return Err(LinalgError::TooManySteps {
                target: t,
                max_steps: tol.max_steps,
            });
        }
        if time + h > t {
            h = t - time;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let c = DP_A[s][j];
                    if c != 0.0 {
                        acc += h * c * kj[i];
                    }
                }
                stage[i] = acc;
            }
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
            a.apply_into(&stage, &mut k[s]);
        }
        let mut err = 0.0_f64;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += DP_E[j] * kj[i];
            }
            let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        steps += 1;
        if err <= 1.0 {
            time += h;
            std::mem::swap(&mut y, &mut y_new);
            // FSAL: the last stage is A y_new
            let last = k.pop().unwrap();
            k.insert(0, last);
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * t.max(1.0) {
                return Err(LinalgError::StepUnderflow(time));
            }
        }
    }
    Ok(y)
}
