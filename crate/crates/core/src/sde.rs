//! Monte Carlo integration of the Langevin equation.
//!
//! Euler-Maruyama converges to the Ito solution, the Heun predictor-corrector
//! to the Stratonovich one. Each scheme refuses a spec carrying the other
//! interpretation.

use thiserror::Error;

use crate::grid::TimeGrid;
use crate::model::{Interpretation, LangevinSpec};
use crate::rng::RngStream;
use crate::stats::{merge_columns, parallel_blocks, Estimate, MomentAccumulator, MomentSeries};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("{scheme:?} integrates {expected:?} equations, spec is {got:?}")]
    WrongInterpretation {
        scheme: Scheme,
        expected: Interpretation,
        got: Interpretation,
    },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("need at least 2 trajectories, got {0}")]
    TooFewTrajectories(u64),
    #[error("time {t} outside the grid span [{t0}, {tf}]")]
    TimesOutOfRange { t: f64, t0: f64, tf: f64 },
    #[error("time {0} is not a grid point")]
    TimeOffGrid(f64),
    #[error("at most 4 times supported, got {0}")]
    TooManyTimes(usize),
    #[error("times must be strictly descending")]
    NonDescendingTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    EulerMaruyama,
    Heun,
}

impl Scheme {
    /// The scheme consistent with an interpretation.
    pub fn for_interpretation(interp: Interpretation) -> Self {
        match interp {
            Interpretation::Ito => Scheme::EulerMaruyama,
            Interpretation::Stratonovich => Scheme::Heun,
        }
    }

    pub fn interpretation(self) -> Interpretation {
        match self {
            Scheme::EulerMaruyama => Interpretation::Ito,
            Scheme::Heun => Interpretation::Stratonovich,
        }
    }

    fn check(self, spec: &LangevinSpec) -> Result<(), SdeError> {
        if spec.interpretation != self.interpretation() {
            return Err(SdeError::WrongInterpretation {
                scheme: self,
                expected: self.interpretation(),
                got: spec.interpretation,
            });
        }
        Ok(())
    }

    #[inline]
    fn step_unchecked(self, spec: &LangevinSpec, phi: f64, dt: f64, xi: f64) -> f64 {
        let dw = (spec.noise_strength * dt).sqrt() * xi;
        match self {
            Scheme::EulerMaruyama => phi + spec.drift(phi) * dt + spec.noise(phi) * dw,
            Scheme::Heun => {
                let a0 = spec.drift(phi);
                let b0 = spec.noise(phi);
                let pred = phi + a0 * dt + b0 * dw;
                phi + 0.5 * (a0 + spec.drift(pred)) * dt + 0.5 * (b0 + spec.noise(pred)) * dw
            }
        }
    }

    /// One step `φ -> φ'` with standard normal draw `xi`.
    pub fn step(self, spec: &LangevinSpec, phi: f64, dt: f64, xi: f64) -> Result<f64, SdeError> {
        self.check(spec)?;
        if !(dt > 0.0) {
            return Err(SdeError::NonPositiveStep(dt));
        }
        Ok(self.step_unchecked(spec, phi, dt, xi))
    }
}

/// `φ + a(φ) dt + b(φ) √(D dt) ξ`.
pub fn step_euler_maruyama(spec: &LangevinSpec, phi: f64, dt: f64, xi: f64) -> Result<f64, SdeError> {
    Scheme::EulerMaruyama.step(spec, phi, dt, xi)
}

/// Heun predictor-corrector with trapezoidal drift and noise amplitude.
pub fn step_stratonovich_heun(spec: &LangevinSpec, phi: f64, dt: f64, xi: f64) -> Result<f64, SdeError> {
    Scheme::Heun.step(spec, phi, dt, xi)
}

/// Distribution of `φ(t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Point(f64),
    Gaussian { mean: f64, std: f64 },
}

impl InitialState {
    fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            InitialState::Point(x) => x,
            InitialState::Gaussian { mean, std } => mean + std * rng.normal(),
        }
    }
}

/// A sample path on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

fn walk(
    spec: &LangevinSpec,
    scheme: Scheme,
    init: &InitialState,
    grid: &TimeGrid,
    rng: &mut RngStream,
    last: usize,
    mut visit: impl FnMut(usize, f64),
) {
    let pts = grid.points();
    let mut phi = init.draw(rng);
    visit(0, phi);
    for i in 1..=last {
        let dt = pts[i] - pts[i - 1];
        phi = scheme.step_unchecked(spec, phi, dt, rng.normal());
        visit(i, phi);
    }
}

/// Trajectory number `stream_id` of the ensemble seeded with `seed`.
pub fn simulate_trajectory(
    spec: &LangevinSpec,
    scheme: Scheme,
    init: InitialState,
    grid: &TimeGrid,
    seed: u64,
    stream_id: u64,
) -> Result<Trajectory, SdeError> {
    scheme.check(spec)?;
    let mut rng = RngStream::new(seed, stream_id);
    let mut values = Vec::with_capacity(grid.points().len());
    walk(spec, scheme, &init, grid, &mut rng, grid.steps(), |_, phi| values.push(phi));
    Ok(Trajectory {
        grid: grid.clone(),
        values,
    })
}

/// Sample mean and variance of `φ` at every grid point over `n_traj`
/// trajectories. Trajectory `i` uses stream `i` of `seed`.
pub fn simulate_ensemble(
    spec: &LangevinSpec,
    scheme: Scheme,
    init: InitialState,
    grid: &TimeGrid,
    n_traj: u64,
    seed: u64,
) -> Result<MomentSeries, SdeError> {
    scheme.check(spec)?;
    if n_traj < 2 {
        return Err(SdeError::TooFewTrajectories(n_traj));
    }
    let n_pts = grid.points().len();
    let accs = parallel_blocks(
        n_traj,
        |range| {
            let mut acc = vec![MomentAccumulator::new(); n_pts];
            for id in range {
                let mut rng = RngStream::new(seed, id);
                walk(spec, scheme, &init, grid, &mut rng, n_pts - 1, |i, phi| acc[i].push(phi));
            }
            acc
        },
        |a, b| merge_columns(a, b),
    )
    .expect("n_traj >= 2");
    Ok(MomentSeries::from_accumulators(grid.points(), &accs))
}

/// Monte Carlo estimate of `E[φ(t1) ⋯ φ(tm)]` for grid times `t1 > … > tm`,
/// `m <= 4`, recorded along each trajectory.
pub fn sample_multitime_moment(
    spec: &LangevinSpec,
    scheme: Scheme,
    init: InitialState,
    grid: &TimeGrid,
    times: &[f64],
    n_traj: u64,
    seed: u64,
) -> Result<Estimate, SdeError> {
    scheme.check(spec)?;
    if n_traj < 2 {
        return Err(SdeError::TooFewTrajectories(n_traj));
    }
    if times.len() > 4 {
        return Err(SdeError::TooManyTimes(times.len()));
    }
    if times.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(SdeError::NonDescendingTimes);
    }
    let mut idx = Vec::with_capacity(times.len());
    for &t in times {
        if t < grid.t0() || t > grid.tf() {
            return Err(SdeError::TimesOutOfRange {
                t,
                t0: grid.t0(),
                tf: grid.tf(),
            });
        }
        idx.push(grid.index_of(t).ok_or(SdeError::TimeOffGrid(t))?);
    }
    let last = idx.iter().copied().max().unwrap_or(0);
    let acc = parallel_blocks(
        n_traj,
        |range| {
            let mut acc = MomentAccumulator::new();
            for id in range {
                let mut rng = RngStream::new(seed, id);
                let mut prod = 1.0;
                walk(spec, scheme, &init, grid, &mut rng, last, |i, phi| {
                    for &j in &idx {
                        if j == i {
                            prod *= phi;
                        }
                    }
                });
                acc.push(prod);
            }
            acc
        },
        |a, b| a.merge(b),
    )
    .expect("n_traj >= 2");
    Ok(acc.mean())
}
