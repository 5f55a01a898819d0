//! Truncated Fock-space form of a one-species master equation.
//!
//! States are stored as coefficient vectors `P(n)` of `|P⟩ = Σ P(n) |n⟩`
//! with `⟨n|m⟩ = n! δ_nm`. In this basis the ladder operators act as
//!
//! ```text
//! (a P)(n)  = (n + 1) P(n + 1)
//! (a† P)(n) = P(n - 1)
//! ```
//!
//! and the projection state `⟨P| = ⟨0| e^a` pairs with `|P⟩` as the plain sum
//! `Σ P(n)`, so factorials never appear. The space holds `n = 0..=N`; the
//! creation operator drops amplitude pushed beyond `N`, and
//! [`truncation_leak`] measures how much was lost.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::linalg::{expm, integrate_linear, LinalgError, Matrix, OdeTolerance, Scalar};
use crate::model::{MasterSpec, Preset, ReactionChannel};
use crate::poly::stirling2_row;

/// Largest truncation evolved with the dense Padé exponential; larger spaces
/// use adaptive Dormand-Prince integration.
pub const DENSE_EXPM_LIMIT: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DoiError {
    #[error("truncation N = {n} too small, channel degree needs N >= {needed}")]
    TruncationTooSmall { n: usize, needed: usize },
    #[error("channel {channel} term of order {order} would jump below n = 0")]
    JumpBelowZero { channel: usize, order: usize },
    #[error("at most 3 times supported, got {0}")]
    TooManyTimes(usize),
    #[error("times must be strictly descending and non-negative")]
    NonDescendingTimes,
    #[error("state has length {got}, space has dimension {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("occupation {n} outside 0..={max}")]
    OutOfRange { n: usize, max: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiouvillianSource {
    Doi,
    Direct,
    Shifted,
}

/// Coefficient-space matrix of the Liouville operator on `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian<T = f64> {
    pub matrix: Matrix<T>,
    pub source: LiouvillianSource,
    /// Largest `|delta|` among the channels.
    pub max_jump: usize,
}

impl<T: Scalar> Liouvillian<T> {
    /// Truncation `N`.
    pub fn truncation(&self) -> usize {
        self.matrix.rows() - 1
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Columns `m <= N - max_jump`, whose jumps all stay inside the space.
    pub fn safe_columns(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.truncation().saturating_sub(self.max_jump)
    }

    pub fn to_f64(&self) -> Liouvillian<f64> {
        Liouvillian {
            matrix: self.matrix.to_f64(),
            source: self.source,
            max_jump: self.max_jump,
        }
    }
}

/// Annihilation and creation matrices on `0..=n`.
pub fn build_ladder_operators<T: Scalar>(n: usize) -> (Matrix<T>, Matrix<T>) {
    let dim = n + 1;
    let mut a = Matrix::zeros(dim, dim);
    let mut c = Matrix::zeros(dim, dim);
    for m in 0..n {
        a.set(m, m + 1, T::from_u64(m as u64 + 1));
        c.set(m + 1, m, T::one());
    }
    (a, c)
}

fn needed_truncation(spec: &MasterSpec) -> usize {
    spec.channels
        .iter()
        .filter(|ch| !ch.rate_poly.is_zero())
        .map(|ch| {
            let deg = ch.rate_poly.degree() as i64;
            deg.max(deg + ch.delta).max(0) as usize
        })
        .max()
        .unwrap_or(0)
}

fn check_truncation(spec: &MasterSpec, n: usize) -> Result<(), DoiError> {
    let needed = needed_truncation(spec).max(1);
    if n < needed {
        return Err(DoiError::TruncationTooSmall { n, needed });
    }
    Ok(())
}

/// Falling-factorial coefficients `c_j` of the channel rate in `T`, so that
/// `rate(n) = Σ_j c_j n(n-1)⋯(n-j+1)`.
fn falling_coeffs<T: Scalar>(ch: &ReactionChannel) -> Vec<T> {
    let coeffs = ch.rate_poly.coeffs();
    let mut out = vec![T::zero(); coeffs.len()];
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let ck = T::from_f64(c);
        for (j, s) in stirling2_row(k).into_iter().enumerate() {
            if s != 0 {
                out[j] = out[j].clone() + ck.clone() * T::from_u64(s as u64);
            }
        }
    }
    out
}

/// Integer powers of a matrix, computed on demand.
struct Powers<T> {
    cache: Vec<Matrix<T>>,
}

impl<T: Scalar> Powers<T> {
    fn new(m: Matrix<T>) -> Self {
        let id = Matrix::identity(m.rows());
        Self {
            cache: vec![id, m],
        }
    }

    fn get(&mut self, k: usize) -> &Matrix<T> {
        while self.cache.len() <= k {
            let next = self.cache.last().unwrap().matmul(&self.cache[1]);
            self.cache.push(next);
        }
        &self.cache[k]
    }
}

/// Doi operator `Σ_ch Σ_j c_j [(c)^{j+δ} - (c)^j] a^j` with `c` standing for
/// the creation matrix (or its shifted form).
fn assemble_channels<T: Scalar>(
    spec: &MasterSpec,
    a: &Matrix<T>,
    creation: &Matrix<T>,
) -> Result<Matrix<T>, DoiError> {
    let dim = a.rows();
    let mut out = Matrix::zeros(dim, dim);
    let mut ap = Powers::new(a.clone());
    let mut cp = Powers::new(creation.clone());
    for (idx, ch) in spec.channels.iter().enumerate() {
        for (j, cj) in falling_coeffs::<T>(ch).into_iter().enumerate() {
            if cj.is_zero() {
                continue;
            }
            let up = j as i64 + ch.delta;
            if up < 0 {
                return Err(DoiError::JumpBelowZero {
                    channel: idx,
                    order: j,
                });
            }
            let aj = ap.get(j).clone();
            let hi = cp.get(up as usize).clone();
            let jump = hi.sub(cp.get(j));
            out = out.add(&jump.matmul(&aj).scale(&cj));
        }
    }
    Ok(out)
}

/// `β(I - c)a + γ(I - c) a a† a + λ(c - I) c a`, with `c` the creation
/// matrix or its shifted form.
fn assemble_verhulst<T: Scalar>(
    beta: f64,
    lambda: f64,
    gamma: f64,
    a: &Matrix<T>,
    creation: &Matrix<T>,
) -> Matrix<T> {
    let id = Matrix::identity(a.rows());
    let i_minus_c = id.sub(creation);
    let death = i_minus_c.matmul(a).scale(&T::from_f64(beta));
    let damping = i_minus_c
        .matmul(&a.matmul(creation).matmul(a))
        .scale(&T::from_f64(gamma));
    let birth = creation
        .sub(&id)
        .matmul(&creation.matmul(a))
        .scale(&T::from_f64(lambda));
    death.add(&damping).add(&birth)
}

fn build_doi_generic<T: Scalar>(
    spec: &MasterSpec,
    n: usize,
    shifted: bool,
) -> Result<Liouvillian<T>, DoiError> {
    check_truncation(spec, n)?;
    let (a, c) = build_ladder_operators::<T>(n);
    let creation = if shifted {
        c.add(&Matrix::identity(n + 1))
    } else {
        c.clone()
    };
    let matrix = match spec.preset {
        Some(Preset::Verhulst {
            beta,
            lambda,
            gamma,
        }) => assemble_verhulst(beta, lambda, gamma, &a, &creation),
        _ => assemble_channels(spec, &a, &creation)?,
    };
    Ok(Liouvillian {
        matrix,
        source: if shifted {
            LiouvillianSource::Shifted
        } else {
            LiouvillianSource::Doi
        },
        max_jump: spec.max_jump(),
    })
}

/// Liouvillian assembled from ladder operators.
///
/// The Verhulst preset uses its closed operator form; every other spec is
/// assembled channel by channel from the normal-ordered jump operators.
pub fn build_liouvillian_doi(spec: &MasterSpec, n: usize) -> Result<Liouvillian<f64>, DoiError> {
    build_doi_generic(spec, n, false)
}

/// [`build_liouvillian_doi`] in any scalar type, e.g. exact rationals.
pub fn build_liouvillian_doi_in<T: Scalar>(spec: &MasterSpec, n: usize) -> Result<Liouvillian<T>, DoiError> {
    build_doi_generic(spec, n, false)
}

/// Channel-by-channel assembly, bypassing any preset operator form.
pub fn build_liouvillian_channels<T: Scalar>(spec: &MasterSpec, n: usize) -> Result<Liouvillian<T>, DoiError> {
    let plain = MasterSpec::from_channels(spec.channels.clone());
    build_doi_generic(&plain, n, false)
}

/// Gain/loss bookkeeping: `G[n+δ][n] += r(n)` when `n+δ` is in range and
/// `G[n][n] -= r(n)` always.
pub fn build_generator_direct(spec: &MasterSpec, n: usize) -> Liouvillian<f64> {
    build_generator_direct_in(spec, n)
}

pub fn build_generator_direct_in<T: Scalar>(spec: &MasterSpec, n: usize) -> Liouvillian<T> {
    let dim = n + 1;
    let mut g = Matrix::zeros(dim, dim);
    for ch in &spec.channels {
        let coeffs: Vec<T> = ch.rate_poly.coeffs().iter().map(|&c| T::from_f64(c)).collect();
        for m in 0..dim {
            let x = T::from_u64(m as u64);
            let r = coeffs
                .iter()
                .rev()
                .fold(T::zero(), |acc, c| acc * x.clone() + c.clone());
            if r.is_zero() {
                continue;
            }
            let target = m as i64 + ch.delta;
            if (0..dim as i64).contains(&target) {
                g.add_at(target as usize, m, r.clone());
            }
            g.add_at(m, m, -r);
        }
    }
    Liouvillian {
        matrix: g,
        source: LiouvillianSource::Direct,
        max_jump: spec.max_jump(),
    }
}

fn check_len(l: &Liouvillian, p: &[f64]) -> Result<(), DoiError> {
    if p.len() != l.dim() {
        return Err(DoiError::StateLength {
            expected: l.dim(),
            got: p.len(),
        });
    }
    Ok(())
}

fn evolve_unchecked(l: &Liouvillian, p0: &[f64], t: f64) -> Result<Vec<f64>, DoiError> {
    if t == 0.0 {
        return Ok(p0.to_vec());
    }
    if l.truncation() <= DENSE_EXPM_LIMIT {
        Ok(expm(&l.matrix.scale(&t))?.matvec(p0))
    } else {
        Ok(integrate_linear(
            &l.matrix.to_sparse(),
            p0,
            t,
            OdeTolerance::default(),
        )?)
    }
}

/// `e^{L t} P0`: dense Padé(13) for `N <= 64`, adaptive Dormand-Prince 5(4)
/// beyond.
pub fn evolve_state(l: &Liouvillian, p0: &[f64], t: f64) -> Result<Vec<f64>, DoiError> {
    check_len(l, p0)?;
    if !(t >= 0.0) {
        return Err(DoiError::NonDescendingTimes);
    }
    evolve_unchecked(l, p0, t)
}

/// `e^{L t} P0` in fixed-point arithmetic with `bits` fractional bits, for
/// generators whose solution comes out of heavy cancellation (the shifted
/// representation with large `n0` is the typical case: `P'(m) = C(n0, m)`
/// decays through sign-alternating couplings).
///
/// The exact rational generator is scaled to substeps with `h ‖L‖₁ <= 1` and
/// each substep sums its Taylor series until the terms vanish on the grid.
/// Cost grows with `‖L‖₁ t`, so keep `N` moderate.
pub fn evolve_state_precise(
    l: &Liouvillian<BigRational>,
    p0: &[f64],
    t: f64,
    bits: u32,
) -> Result<Vec<f64>, DoiError> {
    if p0.len() != l.dim() {
        return Err(DoiError::StateLength {
            expected: l.dim(),
            got: p0.len(),
        });
    }
    if !(t >= 0.0) {
        return Err(DoiError::NonDescendingTimes);
    }
    let one = BigInt::one() << bits;
    let scale = BigRational::from_integer(one.clone());
    let fixed = |x: BigRational| (x * &scale).round().to_integer();
    let steps = (l.matrix.to_f64().norm1() * t).ceil().max(1.0);
    let h = BigRational::from_f64(t / steps);
    let entries: Vec<(usize, usize, BigInt)> = l
        .matrix
        .triplets()
        .into_iter()
        .map(|(i, j, v)| (i, j, fixed(v * &h)))
        .collect();
    let mut x: Vec<BigInt> = p0.iter().map(|&v| fixed(BigRational::from_f64(v))).collect();
    let half = BigInt::one() << (bits - 1);
    for _ in 0..steps as u64 {
        let mut acc = x.clone();
        let mut term = x;
        for j in 1u32.. {
            let mut next = vec![BigInt::zero(); term.len()];
            for (r, c, v) in &entries {
                if !term[*c].is_zero() {
                    next[*r] += v * &term[*c];
                }
            }
            let divisor = BigInt::from(j);
            for v in next.iter_mut() {
                *v = ((&*v + &half) >> bits) / &divisor;
            }
            if next.iter().all(Zero::is_zero) {
                break;
            }
            acc.iter_mut().zip(&next).for_each(|(a, n)| *a += n);
            term = next;
        }
        x = acc;
    }
    Ok(x
        .into_iter()
        .map(|v| BigRational::new(v, one.clone()).to_f64())
        .collect())
}

/// `e_n` on `0..=N`.
pub fn basis_state(n_trunc: usize, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_trunc + 1];
    p[n] = 1.0;
    p
}

/// Poisson(μ) coefficients on `0..=N`.
pub fn poisson_state(mu: f64, n_trunc: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n_trunc + 1);
    let mut term = (-mu).exp();
    for n in 0..=n_trunc {
        if n > 0 {
            term *= mu / n as f64;
        }
        p.push(term);
    }
    p
}

/// `⟨P| (a†a)^k |state⟩ = Σ n^k P(n)`.
pub fn projection_expectation(state: &[f64], k: u32) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64).powi(k as i32) * p)
        .sum()
}

/// Mean and variance of `n` in a (possibly leaky) state, normalized by its
/// retained mass.
pub fn mean_and_variance(state: &[f64]) -> (f64, f64) {
    let m0 = projection_expectation(state, 0);
    let m1 = projection_expectation(state, 1) / m0;
    let m2 = projection_expectation(state, 2) / m0;
    (m1, m2 - m1 * m1)
}

/// `P(n, t | n0, 0)`.
pub fn conditional_prob(l: &Liouvillian, n0: usize, n: usize, t: f64) -> Result<f64, DoiError> {
    let max = l.truncation();
    for v in [n0, n] {
        if v > max {
            return Err(DoiError::OutOfRange { n: v, max });
        }
    }
    Ok(evolve_state(l, &basis_state(max, n0), t)?[n])
}

fn check_times(times: &[f64]) -> Result<(), DoiError> {
    if times.len() > 3 {
        return Err(DoiError::TooManyTimes(times.len()));
    }
    if times.windows(2).any(|w| !(w[0] > w[1])) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(DoiError::NonDescendingTimes);
    }
    Ok(())
}

fn chain(
    l: &Liouvillian,
    p0: &[f64],
    times: &[f64],
    mut insert: impl FnMut(&[f64]) -> Vec<f64>,
) -> Result<Vec<f64>, DoiError> {
    check_len(l, p0)?;
    check_times(times)?;
    let mut p = p0.to_vec();
    let mut now = 0.0;
    for &t in times.iter().rev() {
        p = evolve_unchecked(l, &p, t - now)?;
        p = insert(&p);
        now = t;
    }
    Ok(p)
}

/// `⟨P| n̂ e^{L(t1-t2)} n̂ ⋯ n̂ e^{L tm} |P0⟩` for `t1 > … > tm >= 0`, `m <= 3`.
pub fn green_function_operator(l: &Liouvillian, p0: &[f64], times: &[f64]) -> Result<f64, DoiError> {
    let p = chain(l, p0, times, |p| {
        p.iter().enumerate().map(|(n, v)| n as f64 * v).collect()
    })?;
    Ok(p.iter().sum())
}

/// `1 - Σ_n P(t, n)`.
pub fn truncation_leak(l: &Liouvillian, p0: &[f64], t: f64) -> Result<f64, DoiError> {
    let p = evolve_state(l, p0, t)?;
    Ok(p0.iter().sum::<f64>() - p.iter().sum::<f64>())
}

/// Liouvillian and occupation observable after `a† -> a† + 1`.
///
/// Expectations are read off with `⟨0|` (coefficient 0) instead of `⟨P|`,
/// and states must first be mapped with [`shift_state`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedLiouvillian<T = f64> {
    pub liouvillian: Liouvillian<T>,
    /// `(a† + 1) a`.
    pub observable: Matrix<T>,
}

/// Shifted Liouvillian built from the same operator expression with the
/// creation matrix replaced by `a† + 1`.
pub fn doi_shift(spec: &MasterSpec, n: usize) -> Result<ShiftedLiouvillian<f64>, DoiError> {
    doi_shift_in(spec, n)
}

pub fn doi_shift_in<T: Scalar>(spec: &MasterSpec, n: usize) -> Result<ShiftedLiouvillian<T>, DoiError> {
    let liouvillian = build_doi_generic(spec, n, true)?;
    let (a, c) = build_ladder_operators::<T>(n);
    let observable = c.add(&Matrix::identity(n + 1)).matmul(&a);
    Ok(ShiftedLiouvillian {
        liouvillian,
        observable,
    })
}

/// `e^a |P⟩`: `P'(m) = Σ_n C(n, m) P(n)`.
pub fn shift_state(p: &[f64]) -> Vec<f64> {
    let dim = p.len();
    let mut out = vec![0.0; dim];
    for (n, &pn) in p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        // exact integers while they fit, since shifted states are sensitive to
        // rounding in C(n, m)
        let mut exact = Some(1u128);
        let mut approx = 1.0_f64;
        for (m, o) in out.iter_mut().enumerate().take(n + 1) {
            if m > 0 {
                let (num, den) = ((n + 1 - m) as u128, m as u128);
                exact = exact.and_then(|b| b.checked_mul(num)).map(|b| b / den);
                approx *= num as f64 / den as f64;
            }
            *o += exact.map_or(approx, |b| b as f64) * pn;
        }
    }
    out
}

impl ShiftedLiouvillian<f64> {
    /// `e^{L' t} P'`.
    pub fn evolve(&self, shifted_p0: &[f64], t: f64) -> Result<Vec<f64>, DoiError> {
        evolve_state(&self.liouvillian, shifted_p0, t)
    }

    /// `⟨0| [(a†+1) a]^k |P'⟩`.
    pub fn moment(&self, shifted: &[f64], k: u32) -> f64 {
        let mut v = shifted.to_vec();
        for _ in 0..k {
            v = self.observable.matvec(&v);
        }
        v[0]
    }

    /// Multi-time function in the shifted representation, from an unshifted
    /// initial state.
    pub fn green_function(&self, p0: &[f64], times: &[f64]) -> Result<f64, DoiError> {
        let p = chain(&self.liouvillian, &shift_state(p0), times, |p| {
            self.observable.matvec(p)
        })?;
        Ok(p[0])
    }
}
