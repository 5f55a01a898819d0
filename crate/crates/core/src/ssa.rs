//! Gillespie direct-method simulation of master-equation jump processes.

use thiserror::Error;

use crate::model::MasterSpec;
use crate::rng::RngStream;
use crate::stats::{merge_columns, parallel_blocks, Estimate, MomentAccumulator, MomentSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsaError {
    #[error("need at least 2 trajectories, got {0}")]
    TooFewTrajectories(u64),
    #[error("at most 3 times supported, got {0}")]
    TooManyTimes(usize),
    #[error("times must be strictly descending and non-negative")]
    NonDescendingTimes,
    #[error("recording times must be non-decreasing and non-negative")]
    UnsortedTimes,
    #[error("initial distribution is empty or has no positive mass")]
    BadInitialDistribution,
}

/// One event of the direct method: `(waiting time, new occupation)`.
/// Absorbing states return `(∞, n)`.
pub fn gillespie_step(spec: &MasterSpec, n: u64, rng: &mut RngStream) -> (f64, u64) {
    let total = spec.total_rate(n);
    if !(total > 0.0) {
        return (f64::INFINITY, n);
    }
    let wait = -rng.uniform_open0().ln() / total;
    let target = rng.uniform() * total;
    let mut cum = 0.0;
    let mut chosen = None;
    for ch in &spec.channels {
        let r = ch.rate(n);
        if r <= 0.0 {
            continue;
        }
        cum += r;
        chosen = Some(ch.delta);
        if target < cum {
            break;
        }
    }
    let delta = chosen.expect("positive total rate");
    (wait, (n as i64 + delta) as u64)
}

/// Initial occupation: fixed or drawn from `P(n)`, `n = 0, 1, …`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCount {
    Fixed(u64),
    Distribution(Vec<f64>),
}

impl InitialCount {
    fn validate(&self) -> Result<(), SsaError> {
        if let InitialCount::Distribution(p) = self {
            if p.iter().any(|&x| !(x >= 0.0)) || !(p.iter().sum::<f64>() > 0.0) {
                return Err(SsaError::BadInitialDistribution);
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut RngStream) -> u64 {
        match self {
            InitialCount::Fixed(n) => *n,
            InitialCount::Distribution(p) => {
                let total: f64 = p.iter().sum();
                let u = rng.uniform() * total;
                let mut cum = 0.0;
                for (n, &w) in p.iter().enumerate() {
                    cum += w;
                    if u < cum {
                        return n as u64;
                    }
                }
                p.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u64
            }
        }
    }
}

/// Run one trajectory and report the occupation at each of the
/// non-decreasing `times`.
fn record(spec: &MasterSpec, init: &InitialCount, times: &[f64], rng: &mut RngStream, mut visit: impl FnMut(usize, u64)) {
    let mut n = init.draw(rng);
    let mut t = 0.0;
    let mut pending: Option<(f64, u64)> = None;
    for (i, &tr) in times.iter().enumerate() {
        loop {
            let (dt, next) = *pending.get_or_insert_with(|| gillespie_step(spec, n, rng));
            if t + dt > tr {
                break;
            }
            t += dt;
            n = next;
            pending = None;
        }
        visit(i, n);
    }
}

/// Per-time occupation counts `hist[n]`.
pub type Histogram = Vec<u64>;

fn merge_hist(a: &[Histogram], b: &[Histogram]) -> Vec<Histogram> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let (long, short) = if x.len() >= y.len() { (x, y) } else { (y, x) };
            let mut out = long.clone();
            out.iter_mut().zip(short).for_each(|(o, s)| *o += s);
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsaEnsemble {
    pub moments: MomentSeries,
    pub histograms: Vec<Histogram>,
}

impl SsaEnsemble {
    /// Empirical `P(n, t_i)`.
    pub fn empirical_pmf(&self, i: usize) -> Vec<f64> {
        let h = &self.histograms[i];
        let total: u64 = h.iter().sum();
        h.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

/// Sample moments and histograms of `n` at non-decreasing `times`.
pub fn simulate_ssa_ensemble(
    spec: &MasterSpec,
    times: &[f64],
    init: InitialCount,
    n_traj: u64,
    seed: u64,
) -> Result<SsaEnsemble, SsaError> {
    if n_traj < 2 {
        return Err(SsaError::TooFewTrajectories(n_traj));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(SsaError::UnsortedTimes);
    }
    init.validate()?;
    let m = times.len();
    let (accs, histograms) = parallel_blocks(
        n_traj,
        |range| {
            let mut acc = vec![MomentAccumulator::new(); m];
            let mut hist: Vec<Histogram> = vec![Vec::new(); m];
            for id in range {
                let mut rng = RngStream::new(seed, id);
                record(spec, &init, times, &mut rng, |i, n| {
                    acc[i].push(n as f64);
                    let h = &mut hist[i];
                    let n = n as usize;
                    if h.len() <= n {
                        h.resize(n + 1, 0);
                    }
                    h[n] += 1;
                });
            }
            (acc, hist)
        },
        |a, b| (merge_columns(&a.0, &b.0), merge_hist(&a.1, &b.1)),
    )
    .expect("n_traj >= 2");
    Ok(SsaEnsemble {
        moments: MomentSeries::from_accumulators(times, &accs),
        histograms,
    })
}

/// Monte Carlo estimate of `E[n(t1) ⋯ n(tm)]` for `t1 > … > tm >= 0`,
/// `m <= 3`, with all times recorded along the same trajectory.
pub fn ssa_multitime(
    spec: &MasterSpec,
    times: &[f64],
    init: InitialCount,
    n_traj: u64,
    seed: u64,
) -> Result<Estimate, SsaError> {
    if n_traj < 2 {
        return Err(SsaError::TooFewTrajectories(n_traj));
    }
    if times.len() > 3 {
        return Err(SsaError::TooManyTimes(times.len()));
    }
    if times.windows(2).any(|w| !(w[0] > w[1])) || times.iter().any(|&t| !(t >= 0.0)) {
        return Err(SsaError::NonDescendingTimes);
    }
    init.validate()?;
    let ascending: Vec<f64> = times.iter().rev().copied().collect();
    let acc = parallel_blocks(
        n_traj,
        |range| {
            let mut acc = MomentAccumulator::new();
            for id in range {
                let mut rng = RngStream::new(seed, id);
                let mut prod = 1.0;
                record(spec, &init, &ascending, &mut rng, |_, n| prod *= n as f64);
                acc.push(prod);
            }
            acc
        },
        |a, b| a.merge(b),
    )
    .expect("n_traj >= 2");
    Ok(acc.mean())
}
