//! Problem definitions shared by every representation.
//!
//! A [`LangevinSpec`] describes the scalar Langevin equation
//!
//! ```text
//! dφ/dt = -K φ + U(φ) + b(φ) f(t),    <f(t) f(t')> = D δ(t - t')
//! ```
//!
//! together with the interpretation (Ito or Stratonovich) of the
//! multiplicative noise term. A [`MasterSpec`] describes a one-species jump
//! process on occupation numbers `n >= 0` as a list of reaction channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::Polynomial;

/// Highest polynomial degree accepted for drift, noise and rate polynomials.
pub const MAX_POLY_DEGREE: usize = 4;

/// Occupation numbers scanned by [`MasterSpec::validate`].
pub const DEFAULT_CHECK_RANGE: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("relaxation rate K must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("noise strength D must be non-negative, got {0}")]
    NegativeD(f64),
    #[error("{what} has degree {degree}, limit is {MAX_POLY_DEGREE}")]
    DegreeTooHigh { what: &'static str, degree: usize },
    #[error("channel {channel} has negative rate {rate} at n = {n}")]
    NegativeRate { channel: usize, n: u64, rate: f64 },
    #[error("channel {channel} (delta {delta}) has positive rate at n = {n}, which would leave n >= 0")]
    EscapeBelowZero { channel: usize, delta: i64, n: u64 },
    #[error("channel {channel} has a zero jump")]
    ZeroJump { channel: usize },
    #[error("preset parameter {name} must be non-negative and finite, got {value}")]
    BadPresetParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    Ito,
    Stratonovich,
}

/// Scalar Langevin equation with polynomial drift nonlinearity and noise
/// amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangevinSpec {
    /// Linear relaxation rate `K`.
    pub k_relax: f64,
    /// Nonlinear drift `U(φ)`.
    #[serde(default)]
    pub drift_poly: Polynomial,
    /// Noise amplitude `b(φ)`.
    pub noise_poly: Polynomial,
    /// Noise strength `D`.
    pub noise_strength: f64,
    pub interpretation: Interpretation,
}

impl LangevinSpec {
    /// Ornstein-Uhlenbeck process: `U = 0`, `b = 1`.
    pub fn ornstein_uhlenbeck(k_relax: f64, noise_strength: f64) -> Self {
        Self {
            k_relax,
            drift_poly: Polynomial::zero(),
            noise_poly: Polynomial::constant(1.0),
            noise_strength,
            interpretation: Interpretation::Ito,
        }
    }

    pub fn with_interpretation(mut self, interpretation: Interpretation) -> Self {
        self.interpretation = interpretation;
        self
    }

    /// Check the invariants and hand the model back unchanged.
    pub fn validate(self) -> Result<Self, ModelError> {
        if !(self.k_relax > 0.0) || !self.k_relax.is_finite() {
            return Err(ModelError::NonPositiveK(self.k_relax));
        }
        if !(self.noise_strength >= 0.0) || !self.noise_strength.is_finite() {
            return Err(ModelError::NegativeD(self.noise_strength));
        }
        check_degree("drift_poly", &self.drift_poly)?;
        check_degree("noise_poly", &self.noise_poly)?;
        Ok(self)
    }

    /// Total deterministic drift `a(φ) = -Kφ + U(φ)`.
    #[inline]
    pub fn drift(&self, phi: f64) -> f64 {
        -self.k_relax * phi + self.drift_poly.eval(phi)
    }

    #[inline]
    pub fn noise(&self, phi: f64) -> f64 {
        self.noise_poly.eval(phi)
    }

    /// Drift polynomial `-Kφ + U(φ)` as a single polynomial.
    pub fn drift_polynomial(&self) -> Polynomial {
        self.drift_poly.add(&Polynomial::linear(-self.k_relax))
    }

    /// Noise-induced drift `½ D b b'` separating the Stratonovich and Ito
    /// Fokker-Planck equations.
    pub fn noise_induced_drift(&self) -> Polynomial {
        self.noise_poly
            .mul(&self.noise_poly.derivative())
            .scale(0.5 * self.noise_strength)
    }
}

fn check_degree(what: &'static str, p: &Polynomial) -> Result<(), ModelError> {
    let degree = p.degree();
    if degree > MAX_POLY_DEGREE {
        return Err(ModelError::DegreeTooHigh { what, degree });
    }
    Ok(())
}

/// One jump `n -> n + delta` firing at rate `rate_poly(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionChannel {
    pub delta: i64,
    pub rate_poly: Polynomial,
}

impl ReactionChannel {
    pub fn new(delta: i64, rate_poly: impl Into<Polynomial>) -> Self {
        Self {
            delta,
            rate_poly: rate_poly.into(),
        }
    }

    #[inline]
    pub fn rate(&self, n: u64) -> f64 {
        self.rate_poly.eval(n as f64)
    }
}

/// Named models with their channel expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preset {
    /// Stochastic Verhulst model: death `βn`, damping `γn²`, birth `λn`.
    Verhulst { beta: f64, lambda: f64, gamma: f64 },
    /// `A + A -> A` as the `β = λ = 0` Verhulst model, rate `γn²`.
    AnnihilationToA { gamma: f64 },
    /// `A + A -> ∅`, pairs removed at rate `k n (n-1)`.
    AnnihilationToEmpty { k: f64 },
}

impl Preset {
    pub fn channels(&self) -> Vec<ReactionChannel> {
        match *self {
            Preset::Verhulst {
                beta,
                lambda,
                gamma,
            } => vec![
                ReactionChannel::new(-1, Polynomial::linear(beta)),
                ReactionChannel::new(-1, Polynomial::monomial(gamma, 2)),
                ReactionChannel::new(1, Polynomial::linear(lambda)),
            ],
            Preset::AnnihilationToA { gamma } => {
                vec![ReactionChannel::new(-1, Polynomial::monomial(gamma, 2))]
            }
            Preset::AnnihilationToEmpty { k } => {
                vec![ReactionChannel::new(-2, Polynomial::new(vec![0.0, -k, k]))]
            }
        }
    }

    fn check_parameters(&self) -> Result<(), ModelError> {
        let params: Vec<(&'static str, f64)> = match *self {
            Preset::Verhulst {
                beta,
                lambda,
                gamma,
            } => vec![("beta", beta), ("lambda", lambda), ("gamma", gamma)],
            Preset::AnnihilationToA { gamma } => vec![("gamma", gamma)],
            Preset::AnnihilationToEmpty { k } => vec![("k", k)],
        };
        for (name, value) in params {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ModelError::BadPresetParameter { name, value });
            }
        }
        Ok(())
    }

    /// Linear death coefficient `β` used as the free part of perturbation
    /// theory, when the model has one.
    pub fn linear_death_rate(&self) -> f64 {
        match *self {
            Preset::Verhulst { beta, .. } => beta,
            _ => 0.0,
        }
    }
}

/// A master equation given by its reaction channels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MasterSpec {
    pub channels: Vec<ReactionChannel>,
    /// Set when the channels came from a named preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

impl MasterSpec {
    pub fn from_channels(channels: Vec<ReactionChannel>) -> Self {
        Self {
            channels,
            preset: None,
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        Self {
            channels: preset.channels(),
            preset: Some(preset),
        }
    }

    pub fn verhulst(beta: f64, lambda: f64, gamma: f64) -> Self {
        Self::from_preset(Preset::Verhulst {
            beta,
            lambda,
            gamma,
        })
    }

    pub fn annihilation_to_a(gamma: f64) -> Self {
        Self::from_preset(Preset::AnnihilationToA { gamma })
    }

    pub fn annihilation_to_empty(k: f64) -> Self {
        Self::from_preset(Preset::AnnihilationToEmpty { k })
    }

    pub fn pure_death(beta: f64) -> Self {
        Self::from_channels(vec![ReactionChannel::new(-1, Polynomial::linear(beta))])
    }

    pub fn pure_birth(lambda: f64) -> Self {
        Self::from_channels(vec![ReactionChannel::new(1, Polynomial::linear(lambda))])
    }

    pub fn validate(self) -> Result<Self, ModelError> {
        self.validate_up_to(DEFAULT_CHECK_RANGE)
    }

    /// Check rate non-negativity and the no-escape condition on `0..=n_check`.
    pub fn validate_up_to(self, n_check: u64) -> Result<Self, ModelError> {
        if let Some(preset) = &self.preset {
            preset.check_parameters()?;
        }
        for (idx, ch) in self.channels.iter().enumerate() {
            check_degree("rate_poly", &ch.rate_poly)?;
            if ch.delta == 0 {
                return Err(ModelError::ZeroJump { channel: idx });
            }
            for n in 0..=n_check {
                let rate = ch.rate(n);
                if rate < 0.0 || rate.is_nan() {
                    return Err(ModelError::NegativeRate {
                        channel: idx,
                        n,
                        rate,
                    });
                }
                if rate > 0.0 && (n as i64) + ch.delta < 0 {
                    return Err(ModelError::EscapeBelowZero {
                        channel: idx,
                        delta: ch.delta,
                        n,
                    });
                }
            }
        }
        Ok(self)
    }

    /// Total rate out of state `n`.
    pub fn total_rate(&self, n: u64) -> f64 {
        self.channels.iter().map(|c| c.rate(n)).sum()
    }

    /// Largest `|delta|` over the channels.
    pub fn max_jump(&self) -> usize {
        self.channels
            .iter()
            .map(|c| c.delta.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Linear death coefficient: the preset's `β`, otherwise the sum of the
    /// linear rate coefficients of the `delta = -1` channels.
    pub fn linear_death_rate(&self) -> f64 {
        match &self.preset {
            Some(p @ Preset::Verhulst { .. }) => p.linear_death_rate(),
            _ => self
                .channels
                .iter()
                .filter(|c| c.delta == -1)
                .map(|c| c.rate_poly.coeffs().get(1).copied().unwrap_or(0.0))
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn langevin(k: f64, u: Vec<f64>, b: Vec<f64>, d: f64, i: Interpretation) -> LangevinSpec {
        LangevinSpec {
            k_relax: k,
            drift_poly: Polynomial::new(u),
            noise_poly: Polynomial::new(b),
            noise_strength: d,
            interpretation: i,
        }
    }

    #[test]
    fn langevin_validation() {
        assert!(langevin(1.0, vec![], vec![1.0], 1.0, Interpretation::Ito)
            .validate()
            .is_ok());
        assert_eq!(
            langevin(0.0, vec![], vec![1.0], 1.0, Interpretation::Ito).validate(),
            Err(ModelError::NonPositiveK(0.0))
        );
        assert_eq!(
            langevin(1.0, vec![], vec![1.0], -1.0, Interpretation::Ito).validate(),
            Err(ModelError::NegativeD(-1.0))
        );
        let cubic = langevin(
            1.0,
            vec![0.0, 0.0, 0.0, -0.3],
            vec![0.0, 1.0],
            2.0,
            Interpretation::Stratonovich,
        );
        assert_eq!(cubic.clone().validate(), Ok(cubic));
        let quintic = langevin(
            1.0,
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            vec![1.0],
            1.0,
            Interpretation::Ito,
        );
        assert!(matches!(
            quintic.validate(),
            Err(ModelError::DegreeTooHigh { degree: 5, .. })
        ));
    }

    #[test]
    fn verhulst_preset_expands_to_three_channels() {
        let spec = MasterSpec::verhulst(1.0, 2.0, 0.1).validate().unwrap();
        assert_eq!(spec.channels.len(), 3);
        for n in 0..50_u64 {
            let nf = n as f64;
            let loss: f64 = spec.channels.iter().map(|c| c.rate(n)).sum();
            assert!((loss - (1.0 * nf + 2.0 * nf + 0.1 * nf * nf)).abs() < 1e-12);
            let from_above: f64 = spec
                .channels
                .iter()
                .filter(|c| c.delta == -1)
                .map(|c| c.rate(n + 1))
                .sum();
            let m = nf + 1.0;
            assert!((from_above - (m + 0.1 * m * m)).abs() < 1e-12);
            if n >= 1 {
                let from_below: f64 = spec
                    .channels
                    .iter()
                    .filter(|c| c.delta == 1)
                    .map(|c| c.rate(n - 1))
                    .sum();
                assert!((from_below - 2.0 * (nf - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pair_annihilation_cannot_underflow() {
        let spec = MasterSpec::from_channels(vec![ReactionChannel::new(
            -2,
            vec![0.0, -0.5, 0.5],
        )]);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn constant_death_escapes() {
        let spec = MasterSpec::from_channels(vec![ReactionChannel::new(-1, vec![1.0])]);
        assert!(matches!(
            spec.validate(),
            Err(ModelError::EscapeBelowZero { n: 0, .. })
        ));
    }

    #[test]
    fn negative_rate_rejected() {
        let spec = MasterSpec::from_channels(vec![ReactionChannel::new(1, vec![0.0, 1.0, -0.1])]);
        assert!(matches!(
            spec.validate(),
            Err(ModelError::NegativeRate { n: 11, .. })
        ));
    }

    #[test]
    fn validation_is_idempotent() {
        let spec = MasterSpec::verhulst(1.0, 2.0, 0.1);
        let once = spec.validate().unwrap();
        let twice = once.clone().validate().unwrap();
        assert_eq!(once, twice);
        let l = LangevinSpec::ornstein_uhlenbeck(1.0, 2.0);
        assert_eq!(l.clone().validate().unwrap().validate().unwrap(), l);
    }

    #[test]
    fn noise_induced_drift_for_linear_noise() {
        let spec = langevin(1.0, vec![], vec![0.0, 1.0], 2.0, Interpretation::Stratonovich);
        // ½ D b b' = ½ · 2 · φ · 1
        assert_eq!(spec.noise_induced_drift().coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn config_field_names() {
        let text = r#"
k_relax = 1.0
drift_poly = [0.0, 0.0, 0.0, -0.5]
noise_poly = [0.0, 1.0]
noise_strength = 2.0
interpretation = "stratonovich"
"#;
        let spec: LangevinSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.interpretation, Interpretation::Stratonovich);
        assert_eq!(spec.drift_poly.eval(2.0), -4.0);

        let text = r#"
channels = [{ delta = -2, rate_poly = [0.0, -1.0, 1.0] }]
"#;
        let spec: MasterSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.channels[0].delta, -2);
        assert_eq!(spec.channels[0].rate(3), 6.0);

        let back = toml::to_string(&MasterSpec::verhulst(1.0, 2.0, 0.1)).unwrap();
        let again: MasterSpec = toml::from_str(&back).unwrap();
        assert_eq!(again, MasterSpec::verhulst(1.0, 2.0, 0.1));
    }
}
