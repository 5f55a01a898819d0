//! Dense real polynomials in a single variable.
//!
//! Coefficients are stored lowest order first, so `[c0, c1, c2]` is
//! `c0 + c1 x + c2 x^2`. Drift nonlinearities, noise amplitudes and reaction
//! rates are all represented this way.

use serde::{Deserialize, Serialize};

/// A polynomial `Σ c_k x^k` with coefficients lowest order first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c * x`
    pub fn linear(c: f64) -> Self {
        Self {
            coeffs: vec![0.0, c],
        }
    }

    /// `c * x^k`
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree ignoring trailing zero coefficients. The zero polynomial has
    /// degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Polynomial { coeffs }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    + other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Polynomial { coeffs }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Coefficients in the falling-factorial basis `x(x-1)...(x-j+1)`.
    ///
    /// Uses Stirling numbers of the second kind: `x^k = Σ_j S(k, j) x^(j)`.
    /// Integer arithmetic keeps the conversion exact for the Stirling part.
    pub fn falling_factorial_coeffs(&self) -> Vec<f64> {
        let deg = self.coeffs.len();
        let mut out = vec![0.0; deg];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (j, s) in stirling2_row(k).into_iter().enumerate() {
                if s != 0 {
                    out[j] += c * s as f64;
                }
            }
        }
        out
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

/// Row `k` of the Stirling numbers of the second kind, `S(k, 0..=k)`.
pub fn stirling2_row(k: usize) -> Vec<i64> {
    let mut row = vec![1_i64];
    for n in 1..=k {
        let mut next = vec![0_i64; n + 1];
        for j in 1..=n {
            let carry = if j < row.len() { j as i64 * row[j] } else { 0 };
            next[j] = row[j - 1] + carry;
        }
        row = next;
    }
    row
}

/// Falling factorial `n (n-1) ... (n-j+1)`, zero when `j > n`.
pub fn falling_factorial(n: u64, j: u32) -> u128 {
    if u64::from(j) > n {
        return 0;
    }
    (0..u64::from(j)).fold(1_u128, |acc, i| acc * u128::from(n - i))
}
