//! Finite-volume Fokker-Planck solver on a bounded 1-d grid.
//!
//! Both interpretations are written in flux form `∂t p = -∂φ J` with
//!
//! ```text
//! J = F p - ∂φ(B p),   B = ½ D b²,
//! F = -Kφ + U            (Ito)
//! F = -Kφ + U + ½ D b b' (Stratonovich)
//! ```
//!
//! since `½ ∂φ{b ∂φ[D b p]} = ½ ∂φ²(D b² p) - ∂φ(½ D b b' p)`. Face fluxes use
//! the Chang-Cooper / Scharfetter-Gummel exponential weighting, which keeps
//! the off-diagonal entries nonnegative and reproduces exponential
//! equilibria exactly. The boundaries are reflecting (zero flux), so columns
//! of the generator sum to zero and probability is conserved.
//!
//! Time evolution uses uniformization: with `Λ >= max |G_ii|` the matrix
//! `I + G/Λ` is stochastic and `e^{Gt} = Σ_k Pois(k; Λt) (I + G/Λ)^k`, a sum of
//! nonnegative terms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Interpretation, LangevinSpec, ModelError};
use crate::poly::Polynomial;

/// Fewest cells accepted by [`build_fpe_generator`].
pub const MIN_CELLS: usize = 16;

/// Upper bound on `Λ t` (number of uniformization matrix-vector products).
pub const MAX_UNIFORMIZATION_WORK: f64 = 2.0e8;

const CHUNK: f64 = 32.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpeError {
    #[error("grid has {0} cells, need at least {MIN_CELLS}")]
    GridTooCoarse(usize),
    #[error("grid interval [{phi_min}, {phi_max}] has non-positive width")]
    NonPositiveWidth { phi_min: f64, phi_max: f64 },
    #[error("evolution needs {work:.3e} uniformization steps, limit {MAX_UNIFORMIZATION_WORK:.1e}")]
    StiffnessFailure { work: f64 },
    #[error("point {0} lies outside the grid")]
    OutOfGrid(f64),
    #[error("generator has {closed_blocks} closed blocks, stationary state is not unique")]
    DegenerateNullSpace { closed_blocks: usize },
    #[error("at most 3 times supported, got {0}")]
    TooManyTimes(usize),
    #[error("times must be strictly descending and non-negative")]
    NonDescendingTimes,
    #[error("{times} times but {powers} powers")]
    PowersMismatch { times: usize, powers: usize },
    #[error("density and generator live on different grids")]
    GridMismatch,
    #[error("evolution time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Uniform cell partition of `[phi_min, phi_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub phi_min: f64,
    pub phi_max: f64,
    pub n_cells: usize,
}

impl CellGrid {
    pub fn new(phi_min: f64, phi_max: f64, n_cells: usize) -> Result<Self, FpeError> {
        if !(phi_max > phi_min) || !phi_min.is_finite() || !phi_max.is_finite() {
            return Err(FpeError::NonPositiveWidth { phi_min, phi_max });
        }
        if n_cells < MIN_CELLS {
            return Err(FpeError::GridTooCoarse(n_cells));
        }
        Ok(Self {
            phi_min,
            phi_max,
            n_cells,
        })
    }

    #[inline]
    pub fn width(&self) -> f64 {
        (self.phi_max - self.phi_min) / self.n_cells as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.phi_min + (i as f64 + 0.5) * self.width()
    }

    /// Right face of cell `i`.
    #[inline]
    pub fn face(&self, i: usize) -> f64 {
        self.phi_min + (i + 1) as f64 * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Cell containing `phi`; the right end belongs to the last cell.
    pub fn cell_of(&self, phi: f64) -> Result<usize, FpeError> {
        if !(phi >= self.phi_min && phi <= self.phi_max) {
            return Err(FpeError::OutOfGrid(phi));
        }
        let i = ((phi - self.phi_min) / self.width()).floor() as usize;
        Ok(i.min(self.n_cells - 1))
    }
}

/// Cell-averaged probability density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfGrid {
    pub grid: CellGrid,
    pub values: Vec<f64>,
}

impl PdfGrid {
    /// Unit mass in the cell containing `phi`.
    pub fn delta(grid: CellGrid, phi: f64) -> Result<Self, FpeError> {
        let i = grid.cell_of(phi)?;
        let mut values = vec![0.0; grid.n_cells];
        values[i] = 1.0 / grid.width();
        Ok(Self { grid, values })
    }

    /// `f` sampled at cell centres and normalized to unit mass.
    pub fn from_density(grid: CellGrid, f: impl Fn(f64) -> f64) -> Self {
        let mut p = Self {
            grid,
            values: grid.centers().into_iter().map(f).collect(),
        };
        p.normalize();
        p
    }

    pub fn normalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
    }

    /// `Σ p_i Δ`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.width()
    }

    /// Raw moment `Σ φ_i^k p_i Δ` over cell centres.
    pub fn moment(&self, k: u32) -> f64 {
        let dx = self.grid.width();
        self.values
            .iter()
            .enumerate()
            .map(|(i, p)| self.grid.center(i).powi(k as i32) * p)
            .sum::<f64>()
            * dx
    }

    pub fn mean(&self) -> f64 {
        self.moment(1) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mass();
        let mu = self.moment(1) / m;
        self.moment(2) / m - mu * mu
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ |p_i - q_i| Δ`.
    pub fn l1_distance(&self, other: &PdfGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.width()
    }

    /// `(phi_center, density)` rows.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.grid.center(i), p))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    ZeroFlux,
}

/// Tridiagonal generator `dp/dt = G p` on cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct FpeGenerator {
    pub grid: CellGrid,
    pub interpretation: Interpretation,
    pub boundary: Boundary,
    /// `G[i+1][i]`, length `n - 1`.
    lower: Vec<f64>,
    diag: Vec<f64>,
    /// `G[i][i+1]`, length `n - 1`.
    upper: Vec<f64>,
}

/// `x / (e^x - 1)`.
#[inline]
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

/// Effective drift polynomial `F` of the flux form.
pub fn flux_drift(spec: &LangevinSpec, interpretation: Interpretation) -> Polynomial {
    let base = spec.drift_polynomial();
    match interpretation {
        Interpretation::Ito => base,
        Interpretation::Stratonovich => base.add(&spec.noise_induced_drift()),
    }
}

/// Conservative generator for `spec` on `grid` under `interpretation`.
pub fn build_fpe_generator(
    spec: &LangevinSpec,
    grid: CellGrid,
    interpretation: Interpretation,
) -> Result<FpeGenerator, FpeError> {
    let grid = CellGrid::new(grid.phi_min, grid.phi_max, grid.n_cells)?;
    if !(spec.noise_strength >= 0.0) {
        return Err(ModelError::NegativeD(spec.noise_strength).into());
    }
    let n = grid.n_cells;
    let dx = grid.width();
    let drift = flux_drift(spec, interpretation);
    let b = &spec.noise_poly;
    let db = b.derivative();
    let d = spec.noise_strength;

    let mut lower = vec![0.0; n - 1];
    let mut upper = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    for f in 0..n - 1 {
        let x = grid.face(f);
        let bx = b.eval(x);
        let diff = 0.5 * d * bx * bx;
        let v = drift.eval(x) - d * bx * db.eval(x);
        // J_f = alpha p_f - beta p_{f+1}
        let (alpha, beta) = if diff > f64::MIN_POSITIVE {
            let w = v * dx / diff;
            let s = diff / dx;
            (s * bernoulli(-w), s * bernoulli(w))
        } else {
            (v.max(0.0), (-v).max(0.0))
        };
        let (alpha, beta) = (alpha / dx, beta / dx);
        lower[f] = alpha;
        upper[f] = beta;
        diag[f] -= alpha;
        diag[f + 1] -= beta;
    }
    Ok(FpeGenerator {
        grid,
        interpretation,
        boundary: Boundary::ZeroFlux,
        lower,
        diag,
        upper,
    })
}

impl FpeGenerator {
    /// Generator from explicit bands; the diagonal is set so columns sum to
    /// zero.
    pub fn from_rates(grid: CellGrid, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, FpeError> {
        let grid = CellGrid::new(grid.phi_min, grid.phi_max, grid.n_cells)?;
        let n = grid.n_cells;
        assert_eq!(lower.len(), n - 1);
        assert_eq!(upper.len(), n - 1);
        let mut diag = vec![0.0; n];
        for f in 0..n - 1 {
            diag[f] -= lower[f];
            diag[f + 1] -= upper[f];
        }
        Ok(Self {
            grid,
            interpretation: Interpretation::Ito,
            boundary: Boundary::ZeroFlux,
            lower,
            diag,
            upper,
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.lower[j]
        } else if j == i + 1 {
            self.upper[i]
        } else {
            0.0
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Nonzero `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 && self.lower[i - 1] != 0.0 {
                out.push((i, i - 1, self.lower[i - 1]));
            }
            if self.diag[i] != 0.0 {
                out.push((i, i, self.diag[i]));
            }
            if i + 1 < n && self.upper[i] != 0.0 {
                out.push((i, i + 1, self.upper[i]));
            }
        }
        out
    }

    /// `Δ Σ_i G[i][j]` for every column.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.n();
        let dx = self.grid.width();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.upper[j - 1];
                }
                if j + 1 < n {
                    s += self.lower[j];
                }
                s * dx
            })
            .collect()
    }

    #[inline]
    fn apply_into(&self, p: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = self.diag[i] * p[i];
            if i > 0 {
                s += self.lower[i - 1] * p[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * p[i + 1];
            }
            out[i] = s;
        }
    }

    /// `G p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        self.apply_into(p, &mut out);
        out
    }

    /// Uniformization rate `max |G_ii|`.
    pub fn uniformization_rate(&self) -> f64 {
        self.diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    fn evolve_values(&self, p0: &[f64], t: f64) -> Result<Vec<f64>, FpeError> {
        if !(t >= 0.0) {
            return Err(FpeError::NegativeTime(t));
        }
        let rate = self.uniformization_rate();
        let work = rate * t;
        if work == 0.0 {
            return Ok(p0.to_vec());
        }
        if !(work <= MAX_UNIFORMIZATION_WORK) {
            return Err(FpeError::StiffnessFailure { work });
        }
        let n = self.n();
        let chunks = (work / CHUNK).ceil().max(1.0) as usize;
        let mu = work / chunks as f64;
        let mut p = p0.to_vec();
        let mut term = vec![0.0; n];
        let mut gterm = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..chunks {
            term.copy_from_slice(&p);
            let mut w = (-mu).exp();
            let mut wsum = w;
            acc.iter_mut().zip(&term).for_each(|(a, x)| *a = w * x);
            let mut k = 0_u32;
            loop {
                k += 1;
                // term <- (I + G/Λ) term
                self.apply_into(&term, &mut gterm);
                term.iter_mut()
                    .zip(&gterm)
                    .for_each(|(x, g)| *x += g / rate);
                w *= mu / k as f64;
                wsum += w;
                acc.iter_mut().zip(&term).for_each(|(a, x)| *a += w * x);
                if f64::from(k) > mu && w < 1e-18 * wsum {
                    break;
                }
            }
            p.iter_mut().zip(&acc).for_each(|(x, a)| *x = a / wsum);
        }
        Ok(p)
    }

    fn check_grid(&self, p: &PdfGrid) -> Result<(), FpeError> {
        if p.grid != self.grid {
            return Err(FpeError::GridMismatch);
        }
        Ok(())
    }
}

/// `e^{G t} p0`.
pub fn evolve_pdf(gen: &FpeGenerator, p0: &PdfGrid, t: f64) -> Result<PdfGrid, FpeError> {
    gen.check_grid(p0)?;
    Ok(PdfGrid {
        grid: gen.grid,
        values: gen.evolve_values(&p0.values, t)?,
    })
}

/// Transition density `p(·, t | φ0, 0)` from a single-cell delta.
pub fn conditional_pdf(gen: &FpeGenerator, phi0: f64, t: f64) -> Result<PdfGrid, FpeError> {
    let p0 = PdfGrid::delta(gen.grid, phi0)?;
    evolve_pdf(gen, &p0, t)
}

/// Normalized null vector of the generator.
///
/// A tridiagonal generator is a birth-death chain on cells. The stationary
/// state is unique exactly when the chain has one closed communicating block;
/// on that block detailed balance holds face by face.
pub fn stationary_pdf(gen: &FpeGenerator) -> Result<PdfGrid, FpeError> {
    let n = gen.n();
    let fwd = |f: usize| gen.lower[f] > 0.0;
    let bwd = |f: usize| gen.upper[f] > 0.0;

    let mut closed = Vec::new();
    let mut start = 0;
    for end in 0..n {
        let joins_next = end + 1 < n && fwd(end) && bwd(end);
        if joins_next {
            continue;
        }
        let leaks_left = start > 0 && bwd(start - 1);
        let leaks_right = end + 1 < n && fwd(end);
        if !leaks_left && !leaks_right {
            closed.push((start, end));
        }
        start = end + 1;
    }
    if closed.len() != 1 {
        return Err(FpeError::DegenerateNullSpace {
            closed_blocks: closed.len(),
        });
    }
    let (s, e) = closed[0];
    let mut logp = vec![f64::NEG_INFINITY; n];
    logp[s] = 0.0;
    for i in s..e {
        logp[i + 1] = logp[i] + gen.lower[i].ln() - gen.upper[i].ln();
    }
    let top = logp[s..=e].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = logp.iter().map(|l| (l - top).exp()).collect();
    let mut p = PdfGrid {
        grid: gen.grid,
        values,
    };
    p.normalize();
    Ok(p)
}

/// Multi-time moment `E[φ(t1)^k1 ⋯ φ(tn)^kn]` for `t1 > … > tn >= 0`,
/// `n <= 3`, by chaining transition densities from `p0` at time 0.
pub fn green_function_chain(
    gen: &FpeGenerator,
    p0: &PdfGrid,
    times: &[f64],
    powers: &[u32],
) -> Result<f64, FpeError> {
    gen.check_grid(p0)?;
    if times.len() > 3 {
        return Err(FpeError::TooManyTimes(times.len()));
    }
    if times.len() != powers.len() {
        return Err(FpeError::PowersMismatch {
            times: times.len(),
            powers: powers.len(),
        });
    }
    if times.windows(2).any(|w| !(w[0] > w[1])) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(FpeError::NonDescendingTimes);
    }
    let centers = gen.grid.centers();
    let mut p = p0.values.clone();
    let mut now = 0.0;
    for (&t, &k) in times.iter().zip(powers).rev() {
        p = gen.evolve_values(&p, t - now)?;
        now = t;
        if k > 0 {
            p.iter_mut()
                .zip(&centers)
                .for_each(|(v, x)| *v *= x.powi(k as i32));
        }
    }
    Ok(p.iter().sum::<f64>() * gen.grid.width())
}
