//! Moment estimates, the common output of every representation.

use serde::{Deserialize, Serialize};

/// A value with its standard error. Exact results carry `stderr = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// `|self - other|` in units of the combined standard error. Infinite
    /// when both are exact and differ, zero when both are exact and equal.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        let se = self.stderr.hypot(other.stderr);
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `|self - target| <= sigmas * stderr + slack`.
    pub fn agrees_with(&self, target: f64, sigmas: f64, slack: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.stderr + slack
    }
}

/// Streaming accumulator of the first four central moments.
///
/// Merging follows the pairwise update of Chan et al. / Pébay, so partial
/// accumulators built on different threads combine to the same result as
/// long as the merge order is fixed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&self, other: &MomentAccumulator) -> MomentAccumulator {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        MomentAccumulator {
            n: self.n + other.n,
            mean,
            m2,
            m3,
            m4,
        }
    }

    /// Sample mean with its standard error.
    pub fn mean(&self) -> Estimate {
        let n = self.n as f64;
        let stderr = if self.n >= 2 {
            (self.m2 / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: self.mean,
            stderr,
        }
    }

    /// Unbiased sample variance with the large-sample standard error
    /// `sqrt((μ4 - σ⁴ (n-3)/(n-1)) / n)`.
    pub fn variance(&self) -> Estimate {
        if self.n < 2 {
            return Estimate::exact(0.0);
        }
        let n = self.n as f64;
        let var = self.m2 / (n - 1.0);
        let mu4 = self.m4 / n;
        let v = (mu4 - var * var * (n - 3.0) / (n - 1.0)) / n;
        Estimate {
            value: var,
            stderr: v.max(0.0).sqrt(),
        }
    }
}

/// Reduce accumulators pairwise in a fixed tree order.
pub fn tree_reduce(items: Vec<MomentAccumulator>) -> MomentAccumulator {
    tree_reduce_with(items, |a, b| a.merge(b)).unwrap_or_default()
}

/// Pairwise reduction `((x0 x1) (x2 x3)) ...` in a fixed order.
pub fn tree_reduce_with<A>(mut items: Vec<A>, merge: impl Fn(&A, &A) -> A) -> Option<A> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(&a, &b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Trajectories per work block in ensemble runs.
pub const BLOCK_SIZE: u64 = 256;

/// Run `block` over `[0, n)` split into fixed blocks, in parallel, and merge
/// the block results with [`tree_reduce_with`].
///
/// The block boundaries and the merge tree depend only on `n`, so the result
/// is bit-identical for any thread count.
pub fn parallel_blocks<A, F, M>(n: u64, block: F, merge: M) -> Option<A>
where
    A: Send,
    F: Fn(std::ops::Range<u64>) -> A + Sync,
    M: Fn(&A, &A) -> A,
{
    use rayon::prelude::*;
    let n_blocks = n.div_ceil(BLOCK_SIZE);
    let parts: Vec<A> = (0..n_blocks)
        .into_par_iter()
        .map(|b| block(b * BLOCK_SIZE..((b + 1) * BLOCK_SIZE).min(n)))
        .collect();
    tree_reduce_with(parts, merge)
}

/// Element-wise merge of per-time accumulator vectors.
pub fn merge_columns(a: &[MomentAccumulator], b: &[MomentAccumulator]) -> Vec<MomentAccumulator> {
    a.iter().zip(b).map(|(x, y)| x.merge(y)).collect()
}

/// Mean and variance of a scalar observable at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub t: f64,
    pub mean: Estimate,
    pub variance: Estimate,
}

/// Time-indexed first and second moments.
///
/// `n_samples` is `None` for deterministic (grid or matrix) computations,
/// whose standard errors are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub points: Vec<MomentPoint>,
    pub n_samples: Option<u64>,
}

impl MomentSeries {
    pub fn exact(times: &[f64], means: &[f64], variances: &[f64]) -> Self {
        let points = times
            .iter()
            .zip(means)
            .zip(variances)
            .map(|((&t, &m), &v)| MomentPoint {
                t,
                mean: Estimate::exact(m),
                variance: Estimate::exact(v),
            })
            .collect();
        Self {
            points,
            n_samples: None,
        }
    }

    pub fn from_accumulators(times: &[f64], accs: &[MomentAccumulator]) -> Self {
        let n = accs.first().map(|a| a.count());
        let points = times
            .iter()
            .zip(accs)
            .map(|(&t, a)| MomentPoint {
                t,
                mean: a.mean(),
                variance: a.variance(),
            })
            .collect();
        Self {
            points,
            n_samples: n,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point closest to `t`.
    pub fn at(&self, t: f64) -> Option<&MomentPoint> {
        self.points.iter().min_by(|a, b| {
            (a.t - t)
                .abs()
                .partial_cmp(&(b.t - t).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    }

    /// Raw second moment `E[x²] = var + mean²` at each time (plug-in).
    pub fn second_raw_moment(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.variance.value + p.mean.value * p.mean.value)
            .collect()
    }
}
