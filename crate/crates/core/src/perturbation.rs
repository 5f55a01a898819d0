//! Interaction-picture Dyson series on the truncated occupation space.
//!
//! With `L = L0 + g L_I` and a diagonal free part `L0 = -β n̂`, the k-th term
//! of the chronological exponential is
//!
//! ```text
//! ∫_{0<u_k<…<u_1<t} e^{L0(t-u_1)} g L_I e^{L0(u_1-u_2)} ⋯ g L_I e^{L0 u_k} du.
//! ```
//!
//! It is evaluated with composite midpoint nodes on the open simplex: a node
//! never meets its own time, so the equal-time value of the free propagator
//! is zero. Successive halvings of the step are combined by Richardson
//! extrapolation.

use thiserror::Error;

use crate::doi::{
    build_liouvillian_doi, doi_shift, evolve_state, projection_expectation, shift_state, DoiError,
    Liouvillian,
};
use crate::linalg::{expm, Matrix, SparseMatrix};
use crate::model::MasterSpec;

/// Highest series order supported.
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("model has no linear death rate to split off")]
    NoLinearPart,
    #[error("order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("order-{order} quadrature did not converge: last change {change:.3e} at {nodes} nodes")]
    QuadratureNotConverged {
        order: usize,
        nodes: usize,
        change: f64,
    },
    #[error(transparent)]
    Doi(#[from] DoiError),
}

/// Free propagator `Δ(t, t') = θ(t - t') e^{-rate (t - t')}` with `θ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub rate: f64,
}

impl Propagator {
    pub fn eval(&self, t: f64, t_prime: f64) -> f64 {
        if t > t_prime {
            (-self.rate * (t - t_prime)).exp()
        } else {
            0.0
        }
    }
}

pub fn propagator_eval(p: &Propagator, t: f64, t_prime: f64) -> f64 {
    p.eval(t, t_prime)
}

/// `L = L0 + g L_I` with diagonal `L0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitLiouvillian {
    /// Diagonal of `L0`.
    pub l0: Vec<f64>,
    pub interaction: Matrix<f64>,
    pub coupling: f64,
}

impl SplitLiouvillian {
    /// Split off `L0 = -β diag(n)`.
    pub fn from_matrix(l: &Matrix<f64>, beta: f64) -> Result<Self, PerturbationError> {
        if !(beta > 0.0) {
            return Err(PerturbationError::NoLinearPart);
        }
        let l0: Vec<f64> = (0..l.rows()).map(|n| -beta * n as f64).collect();
        let mut interaction = l.clone();
        for (n, d) in l0.iter().enumerate() {
            interaction.add_at(n, n, -d);
        }
        Ok(Self {
            l0,
            interaction,
            coupling: 1.0,
        })
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn dim(&self) -> usize {
        self.l0.len()
    }

    /// `L0 + g L_I`.
    pub fn full(&self) -> Matrix<f64> {
        Matrix::diag(&self.l0).add(&self.interaction.scale(&self.coupling))
    }

    pub fn free(&self) -> Matrix<f64> {
        Matrix::diag(&self.l0)
    }
}

/// Split of the Doi Liouvillian of `spec` around its linear death rate.
pub fn split_liouvillian(spec: &MasterSpec, n: usize) -> Result<SplitLiouvillian, PerturbationError> {
    let beta = spec.linear_death_rate();
    if !(beta > 0.0) {
        return Err(PerturbationError::NoLinearPart);
    }
    let l = build_liouvillian_doi(spec, n)?;
    SplitLiouvillian::from_matrix(&l.matrix, beta)
}

/// Same split in the shifted representation `a† -> a† + 1`, where the linear
/// death term alone is already diagonal.
pub fn split_shifted(spec: &MasterSpec, n: usize) -> Result<SplitLiouvillian, PerturbationError> {
    let beta = spec.linear_death_rate();
    if !(beta > 0.0) {
        return Err(PerturbationError::NoLinearPart);
    }
    let s = doi_shift(spec, n)?;
    SplitLiouvillian::from_matrix(&s.liouvillian.matrix, beta)
}

/// Treatment of coincident quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coincidence {
    /// `θ(0) = 0`: equal-time nodes contribute nothing.
    #[default]
    Exclude,
    /// `θ(0) = 1`: equal-time nodes contribute with full weight.
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Nodes at the coarsest level.
    pub start_nodes: usize,
    /// Number of halvings before giving up.
    pub max_levels: usize,
    /// Relative change between extrapolated levels accepted as converged.
    pub tol: f64,
    pub coincidence: Coincidence,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            start_nodes: 16,
            max_levels: 11,
            tol: 1e-12,
            coincidence: Coincidence::Exclude,
        }
    }
}

/// Order-`k` term at a fixed number of midpoint nodes, applied to `v`.
pub fn dyson_term_fixed(split: &SplitLiouvillian, k: usize, t: f64, v: &[f64], nodes: usize, coincidence: Coincidence) -> Vec<f64> {
    let free_at = |tau: f64, x: &[f64]| -> Vec<f64> {
        x.iter().zip(&split.l0).map(|(xi, l)| xi * (l * tau).exp()).collect()
    };
    if k == 0 || t == 0.0 {
        return if k == 0 { free_at(t, v) } else { vec![0.0; v.len()] };
    }
    let dim = split.dim();
    let h = t / nodes as f64;
    let step: Vec<f64> = split.l0.iter().map(|l| (l * h).exp()).collect();
    let half: Vec<f64> = split.l0.iter().map(|l| (0.5 * l * h).exp()).collect();
    let li = SparseMatrix::from_dense(&split.interaction);
    let g = split.coupling;

    let mut x: Vec<Vec<f64>> = (0..nodes).map(|i| free_at((i as f64 + 0.5) * h, v)).collect();
    let mut w = vec![vec![0.0; dim]; nodes];
    for level in 1..=k {
        for (wi, xi) in w.iter_mut().zip(&x) {
            li.apply_into(xi, wi);
            wi.iter_mut().for_each(|e| *e *= g * h);
        }
        if level == k {
            break;
        }
        let mut acc = vec![0.0; dim];
        for i in 0..nodes {
            if i > 0 {
                for d in 0..dim {
                    acc[d] = step[d] * (acc[d] + w[i - 1][d]);
                }
            }
            let xi = &mut x[i];
            xi.copy_from_slice(&acc);
            if coincidence == Coincidence::Include {
                xi.iter_mut().zip(&w[i]).for_each(|(a, b)| *a += b);
            }
        }
    }
    let mut acc = vec![0.0; dim];
    for (i, wi) in w.iter().enumerate() {
        if i > 0 {
            for d in 0..dim {
                acc[d] *= step[d];
            }
        }
        acc.iter_mut().zip(wi).for_each(|(a, b)| *a += b);
    }
    acc.iter().zip(&half).map(|(a, s)| a * s).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Order-`k` Dyson term applied to `v`, refined by step halving and
/// Richardson extrapolation until converged.
pub fn dyson_term_apply(
    split: &SplitLiouvillian,
    k: usize,
    t: f64,
    v: &[f64],
    opts: &QuadratureOptions,
) -> Result<Vec<f64>, PerturbationError> {
    if k > MAX_ORDER {
        return Err(PerturbationError::OrderTooHigh(k));
    }
    if k == 0 || t == 0.0 {
        return Ok(dyson_term_fixed(split, k, t, v, 1, opts.coincidence));
    }
    let mut table: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut change = f64::INFINITY;
    let mut nodes = opts.start_nodes.max(1);
    for level in 0..=opts.max_levels {
        let mut row = vec![dyson_term_fixed(split, k, t, v, nodes, opts.coincidence)];
        for j in 1..=level {
            let factor = (1_u64 << j) as f64 - 1.0;
            let prev = &table[level - 1][j - 1];
            let cur = &row[j - 1];
            let next: Vec<f64> = cur.iter().zip(prev).map(|(c, p)| c + (c - p) / factor).collect();
            row.push(next);
        }
        if level > 0 {
            let best = &row[level];
            let last = &table[level - 1][level - 1];
            let diff: Vec<f64> = best.iter().zip(last).map(|(a, b)| a - b).collect();
            change = max_abs(&diff);
            if change <= opts.tol * max_abs(best).max(f64::MIN_POSITIVE) || change == 0.0 {
                return Ok(row.pop().unwrap());
            }
        }
        table.push(row);
        nodes *= 2;
    }
    Err(PerturbationError::QuadratureNotConverged {
        order: k,
        nodes: nodes / 2,
        change,
    })
}

/// Order-`k` Dyson term as a matrix, one column at a time.
pub fn dyson_term(split: &SplitLiouvillian, k: usize, t: f64, opts: &QuadratureOptions) -> Result<Matrix<f64>, PerturbationError> {
    let dim = split.dim();
    let mut out = Matrix::zeros(dim, dim);
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        let col = dyson_term_apply(split, k, t, &e, opts)?;
        for (i, v) in col.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Representation in which the series is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Representation {
    /// `a† -> a† + 1`; mean read as `⟨0| (a†+1) a`.
    #[default]
    Shifted,
    /// Plain Doi form; mean read as `⟨P| n̂`.
    Unshifted,
}

/// Mean occupation from one series order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderEstimate {
    pub order: usize,
    /// Contribution of this order alone.
    pub term: f64,
    /// Sum of orders `0..=order`.
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeriesExpansion {
    pub t: f64,
    pub orders: Vec<OrderEstimate>,
    /// Mean from the full matrix exponential.
    pub exact: f64,
}

/// Mean occupation at `t` from `n0`, order by order up to `max_order`.
pub fn dyson_moment_series(
    spec: &MasterSpec,
    n: usize,
    n0: usize,
    max_order: usize,
    t: f64,
    repr: Representation,
    opts: &QuadratureOptions,
) -> Result<MomentSeriesExpansion, PerturbationError> {
    if max_order > MAX_ORDER {
        return Err(PerturbationError::OrderTooHigh(max_order));
    }
    if n0 > n {
        return Err(DoiError::OutOfRange { n: n0, max: n }.into());
    }
    let mut p0 = vec![0.0; n + 1];
    p0[n0] = 1.0;
    let (split, start): (SplitLiouvillian, Vec<f64>) = match repr {
        Representation::Shifted => (split_shifted(spec, n)?, shift_state(&p0)),
        Representation::Unshifted => (split_liouvillian(spec, n)?, p0.clone()),
    };
    let read = |v: &[f64]| match repr {
        // ⟨0|(a†+1)a picks (n+1)·v(n+1) at n = 0
        Representation::Shifted => v.get(1).copied().unwrap_or(0.0),
        Representation::Unshifted => projection_expectation(v, 1),
    };
    let mut orders = Vec::with_capacity(max_order + 1);
    let mut sum = 0.0;
    for k in 0..=max_order {
        let term = read(&dyson_term_apply(&split, k, t, &start, opts)?);
        sum += term;
        orders.push(OrderEstimate {
            order: k,
            term,
            partial_sum: sum,
        });
    }
    let l = Liouvillian {
        matrix: split.full(),
        source: crate::doi::LiouvillianSource::Doi,
        max_jump: spec.max_jump(),
    };
    let exact = read(&evolve_state(&l, &start, t)?);
    Ok(MomentSeriesExpansion { t, orders, exact })
}

/// `e^{(L0 + g L_I) t}` as a reference for the series.
pub fn exact_evolution(split: &SplitLiouvillian, t: f64) -> Matrix<f64> {
    expm(&split.full().scale(&t)).expect("finite generator")
}
