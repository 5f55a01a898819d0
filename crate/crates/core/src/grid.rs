//! Time grids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("empty time interval [{t0}, {tf}]")]
    EmptyInterval { t0: f64, tf: f64 },
    #[error("a time grid needs at least one step")]
    NoSteps,
    #[error("grading exponent must be >= 1, got {0}")]
    BadGrading(f64),
}

/// Strictly increasing time points. Uniform unless built with
/// [`TimeGrid::graded`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    graded: bool,
}

impl TimeGrid {
    /// `steps + 1` uniform points from `t0` to `tf`.
    pub fn uniform(t0: f64, tf: f64, steps: usize) -> Result<Self, GridError> {
        check_interval(t0, tf, steps)?;
        let h = (tf - t0) / steps as f64;
        let mut points: Vec<f64> = (0..=steps).map(|j| t0 + j as f64 * h).collect();
        points[steps] = tf;
        Ok(Self {
            points,
            graded: false,
        })
    }

    /// Points `t0 + (tf - t0) (j / steps)^exponent`, clustered near `t0`.
    pub fn graded(t0: f64, tf: f64, steps: usize, exponent: f64) -> Result<Self, GridError> {
        check_interval(t0, tf, steps)?;
        if !(exponent >= 1.0) {
            return Err(GridError::BadGrading(exponent));
        }
        let points = (0..=steps)
            .map(|j| t0 + (tf - t0) * (j as f64 / steps as f64).powf(exponent))
            .collect();
        Ok(Self {
            points,
            graded: exponent != 1.0,
        })
    }

    /// Grid through explicit points, which must be strictly increasing.
    pub fn from_points(points: Vec<f64>) -> Result<Self, GridError> {
        if points.len() < 2 {
            return Err(GridError::NoSteps);
        }
        for w in points.windows(2) {
            if !(w[1] > w[0]) {
                return Err(GridError::EmptyInterval { t0: w[0], tf: w[1] });
            }
        }
        let graded = {
            let h0 = points[1] - points[0];
            points
                .windows(2)
                .any(|w| ((w[1] - w[0]) - h0).abs() > 1e-12 * h0.max(1.0))
        };
        Ok(Self { points, graded })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn t0(&self) -> f64 {
        self.points[0]
    }

    pub fn tf(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_graded(&self) -> bool {
        self.graded
    }

    /// Index of the grid point equal to `t` up to a relative `1e-9` of the
    /// local step, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let idx = self.points.partition_point(|&p| p < t);
        let candidates = [idx.checked_sub(1), Some(idx)];
        candidates
            .into_iter()
            .flatten()
            .filter(|&i| i < self.points.len())
            .find(|&i| {
                let h = if i + 1 < self.points.len() {
                    self.points[i + 1] - self.points[i]
                } else {
                    self.points[i] - self.points[i - 1]
                };
                (self.points[i] - t).abs() <= 1e-9 * h
            })
    }
}

/// `steps + 1` uniform points on `[t0, tf]`.
pub fn make_time_grid(t0: f64, tf: f64, steps: usize) -> Result<TimeGrid, GridError> {
    TimeGrid::uniform(t0, tf, steps)
}

fn check_interval(t0: f64, tf: f64, steps: usize) -> Result<(), GridError> {
    if !(tf > t0) {
        return Err(GridError::EmptyInterval { t0, tf });
    }
    if steps == 0 {
        return Err(GridError::NoSteps);
    }
    Ok(())
}
