//! Rate equations for homogeneous densities.
//!
//! For pair annihilation `A + A -> ∅` with vertex strength `λD`, the mean
//! density obeys `∂t a = -2λD a²` at tree level. The one-loop correction adds
//! a memory term whose kernel is the spatial integral of the squared heat
//! kernel,
//!
//! ```text
//! ∂t a(t) = -2λD a(t)² + 4λ²D² ∫_0^t (8πD(t-u))^{-d/2} a(u)² du.
//! ```
//!
//! The kernel is integrable only for `d < 2`; higher dimensions need
//! renormalization and are refused.

use thiserror::Error;

use crate::grid::TimeGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateLoopError {
    #[error("loop kernel needs tau > 0, got {0}")]
    NonPositiveTau(f64),
    #[error("the one-loop memory kernel diverges in d = {0}; the equation must be renormalized first")]
    DimensionNotRenormalized(u32),
    #[error("fixed-point iteration failed at t = {t}")]
    StepNotConverged { t: f64 },
    #[error("invalid rate model: {0}")]
    InvalidModel(&'static str),
}

/// Homogeneous pair-annihilation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub lambda: f64,
    pub diffusion: f64,
    pub dim: u32,
    pub a0: f64,
}

impl RateModel {
    pub fn validate(self) -> Result<Self, RateLoopError> {
        if !(self.lambda >= 0.0) {
            return Err(RateLoopError::InvalidModel("lambda must be >= 0"));
        }
        if !(self.diffusion > 0.0) {
            return Err(RateLoopError::InvalidModel("D must be > 0"));
        }
        if !(self.a0 >= 0.0) {
            return Err(RateLoopError::InvalidModel("a0 must be >= 0"));
        }
        if self.dim == 0 {
            return Err(RateLoopError::InvalidModel("dimension must be >= 1"));
        }
        Ok(self)
    }

    /// Tree-level rate constant `2λD`.
    pub fn rate_constant(&self) -> f64 {
        2.0 * self.lambda * self.diffusion
    }
}

/// `a0 / (1 + 2λD a0 t)` on the grid.
pub fn mean_field_solve(model: &RateModel, grid: &TimeGrid) -> Vec<f64> {
    let k = model.rate_constant();
    grid.points()
        .iter()
        .map(|&t| model.a0 / (1.0 + k * model.a0 * (t - grid.t0())))
        .collect()
}

/// `∫ d^d r Δ(τ, r)² = (8πDτ)^{-d/2}`.
pub fn loop_kernel(dim: u32, diffusion: f64, tau: f64) -> Result<f64, RateLoopError> {
    if !(tau > 0.0) {
        return Err(RateLoopError::NonPositiveTau(tau));
    }
    Ok((8.0 * std::f64::consts::PI * diffusion * tau).powf(-0.5 * dim as f64))
}

/// Whether the kernel is integrable at `τ -> 0`.
pub fn kernel_integrable(dim: u32) -> bool {
    dim < 2
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    /// Multiplies the loop coefficient `4λ²D²`; 0 gives the tree level.
    pub loop_scale: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self {
            loop_scale: 1.0,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Product-integration weights of `∫_0^{t_n} (t_n - u)^{-1/2} f(u) du` for
/// piecewise-linear `f` on `points[..=n]`.
fn sqrt_kernel_weights(points: &[f64], n: usize) -> Vec<f64> {
    let tn = points[n];
    let mut w = vec![0.0; n + 1];
    for j in 0..n {
        let h = points[j + 1] - points[j];
        let sa = (tn - points[j]).sqrt();
        let sb = (tn - points[j + 1]).max(0.0).sqrt();
        let den = (sa + sb) * (sa + sb);
        w[j] += 2.0 / 3.0 * h * (sa + 2.0 * sb) / den;
        w[j + 1] += 2.0 / 3.0 * h * (2.0 * sa + sb) / den;
    }
    w
}

/// One-loop corrected density in `d = 1`.
///
/// Works with `v = 1/a`, which satisfies `v' = 2λD - g(t)/a²` with `g` the
/// memory term. The memory integral uses exact product-integration weights
/// for the `τ^{-1/2}` kernel against piecewise-linear `a²`, and the step is
/// trapezoidal in `v`, solved by fixed-point iteration.
pub fn one_loop_solve(model: &RateModel, grid: &TimeGrid) -> Result<Vec<f64>, RateLoopError> {
    one_loop_solve_with(model, grid, &LoopOptions::default())
}

pub fn one_loop_solve_with(model: &RateModel, grid: &TimeGrid, opts: &LoopOptions) -> Result<Vec<f64>, RateLoopError> {
    let model = model.validate()?;
    if !kernel_integrable(model.dim) {
        return Err(RateLoopError::DimensionNotRenormalized(model.dim));
    }
    let pts: Vec<f64> = grid.points().iter().map(|t| t - grid.t0()).collect();
    let m = pts.len();
    if model.a0 == 0.0 {
        return Ok(vec![0.0; m]);
    }
    let kappa = model.rate_constant();
    let ld = model.lambda * model.diffusion;
    let coeff = opts.loop_scale * 4.0 * ld * ld / (8.0 * std::f64::consts::PI * model.diffusion).sqrt();

    let mut a = vec![model.a0; m];
    let mut v = vec![1.0 / model.a0; m];
    let mut f = vec![model.a0 * model.a0; m];
    // memory term at t_n divided by a_n²
    let mut mem_prev = 0.0;
    for n in 0..m - 1 {
        let h = pts[n + 1] - pts[n];
        let w = sqrt_kernel_weights(&pts, n + 1);
        let known: f64 = (0..=n).map(|j| w[j] * f[j]).sum::<f64>() * coeff;
        let self_w = w[n + 1] * coeff;
        let mut vn = v[n] + kappa * h;
        let mut converged = false;
        for _ in 0..opts.max_iter {
            if !(vn > 0.0) || !vn.is_finite() {
                return Err(RateLoopError::StepNotConverged { t: pts[n + 1] });
            }
            let mem = known * vn * vn + self_w;
            let next = v[n] + kappa * h - 0.5 * h * (mem_prev + mem);
            let done = (next - vn).abs() <= opts.tol * next.abs();
            vn = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged || !(vn > 0.0) {
            return Err(RateLoopError::StepNotConverged { t: pts[n + 1] });
        }
        v[n + 1] = vn;
        a[n + 1] = 1.0 / vn;
        f[n + 1] = a[n + 1] * a[n + 1];
        mem_prev = known * vn * vn + self_w;
    }
    Ok(a)
}

/// Logistic flow `ṅ = (λ - β) n - γ n²` from `n0`.
pub fn verhulst_mean_field(beta: f64, lambda: f64, gamma: f64, n0: f64, grid: &TimeGrid) -> Vec<f64> {
    let r = lambda - beta;
    grid.points()
        .iter()
        .map(|&t| {
            let t = t - grid.t0();
            if n0 == 0.0 {
                return 0.0;
            }
            // n0 / (e^{-rt} + γ n0 (1 - e^{-rt}) / r)
            let growth = if r == 0.0 { t } else { -(-r * t).exp_m1() / r };
            n0 / ((-r * t).exp() + gamma * n0 * growth)
        })
        .collect()
}

/// Mean-field decay `n0 / (1 + 2 k n0 t)` of `A + A -> ∅` with rate
/// `k n (n - 1)`.
pub fn annihilation_mean_field(k: f64, n0: f64, t: f64) -> f64 {
    n0 / (1.0 + 2.0 * k * n0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_time_grid;
    use approx::assert_abs_diff_eq;

    fn model(lambda: f64, a0: f64) -> RateModel {
        RateModel {
            lambda,
            diffusion: 1.0,
            dim: 1,
            a0,
        }
    }

    #[test]
    fn mean_field_examples() {
        let g = make_time_grid(0.0, 1.0, 4).unwrap();
        assert!(mean_field_solve(&model(0.0, 2.0), &g).iter().all(|&a| a == 2.0));
        let a = mean_field_solve(&model(0.5, 1.0), &g);
        assert_abs_diff_eq!(*a.last().unwrap(), 0.5, epsilon = 1e-15);
        let g = make_time_grid(0.0, 1e6, 1).unwrap();
        let a = mean_field_solve(&model(0.5, 3.0), &g);
        assert!((a[1] * 1e6 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn kernel_values() {
        let d = 1.0 / (8.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(loop_kernel(1, d, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let r = loop_kernel(1, 0.3, 0.5).unwrap() / loop_kernel(1, 0.3, 2.0).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-14);
        let r = loop_kernel(2, 0.3, 0.5).unwrap() / loop_kernel(2, 0.3, 2.0).unwrap();
        assert_abs_diff_eq!(r, 4.0, epsilon = 1e-14);
        assert!(!kernel_integrable(2));
        assert_eq!(loop_kernel(1, 1.0, 0.0), Err(RateLoopError::NonPositiveTau(0.0)));
    }

    #[test]
    fn weights_integrate_linear_functions_exactly() {
        let pts: Vec<f64> = (0..=10).map(|i| (i as f64 / 10.0).powi(2) * 2.0).collect();
        let n = 10;
        let w = sqrt_kernel_weights(&pts, n);
        let t = pts[n];
        let c: f64 = w.iter().sum();
        assert_abs_diff_eq!(c, 2.0 * t.sqrt(), epsilon = 1e-13);
        let lin: f64 = w.iter().zip(&pts).map(|(wi, u)| wi * u).sum();
        assert_abs_diff_eq!(lin, 4.0 / 3.0 * t.powf(1.5), epsilon = 1e-13);
    }

    #[test]
    fn zero_coupling_keeps_density() {
        let g = make_time_grid(0.0, 2.0, 20).unwrap();
        let a = one_loop_solve(&model(0.0, 1.5), &g).unwrap();
        assert!(a.iter().all(|&x| x == 1.5));
    }

    #[test]
    fn loop_raises_density() {
        let g = TimeGrid::graded(0.0, 3.0, 200, 2.0).unwrap();
        let m = model(0.4, 1.0);
        let mf = mean_field_solve(&m, &g);
        let ol = one_loop_solve(&m, &g).unwrap();
        for (x, y) in ol.iter().zip(&mf).skip(1) {
            assert!(x > y);
        }
    }

    #[test]
    fn zero_loop_scale_reproduces_mean_field() {
        let g = make_time_grid(0.0, 5.0, 100).unwrap();
        let m = model(0.3, 2.0);
        let opts = LoopOptions {
            loop_scale: 0.0,
            ..Default::default()
        };
        let ol = one_loop_solve_with(&m, &g, &opts).unwrap();
        for (x, y) in ol.iter().zip(mean_field_solve(&m, &g)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_dimensions_refused() {
        let g = make_time_grid(0.0, 1.0, 10).unwrap();
        for d in [2, 3] {
            let m = RateModel { dim: d, ..model(0.1, 1.0) };
            assert_eq!(one_loop_solve(&m, &g), Err(RateLoopError::DimensionNotRenormalized(d)));
        }
    }

    #[test]
    fn logistic_limits() {
        let g = make_time_grid(0.0, 2.0, 4).unwrap();
        let n = verhulst_mean_field(1.0, 1.0, 0.5, 4.0, &g);
        for (x, t) in n.iter().zip(g.points()) {
            assert_abs_diff_eq!(*x, 4.0 / (1.0 + 0.5 * 4.0 * t), epsilon = 1e-13);
        }
        let g = make_time_grid(0.0, 60.0, 2).unwrap();
        let n = verhulst_mean_field(1.0, 2.0, 0.1, 20.0, &g);
        assert_abs_diff_eq!(n[2], 10.0, epsilon = 1e-9);
        let n = verhulst_mean_field(2.0, 1.0, 0.1, 5.0, &g);
        assert!(n[2] > 0.0 && n[2] < 1e-20);
    }
}
