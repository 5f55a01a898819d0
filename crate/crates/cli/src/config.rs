//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [time]
//! tf = 5.0
//! steps = 50
//! outputs = [0.5, 1.0, 2.0, 5.0]   # optional
//!
//! [master]
//! preset = { kind = "verhulst", beta = 1.0, lambda = 2.0, gamma = 0.1 }
//!
//! [doi]
//! truncation = 200
//! n0 = 20
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use stochlab::grid::TimeGrid;
use stochlab::perturbation::Representation;
use stochlab::sde::Scheme;
use stochlab::{make_time_grid, LangevinSpec, MasterSpec, Preset, ReactionChannel};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub time: Option<TimeConfig>,
    pub langevin: Option<LangevinSpec>,
    pub master: Option<MasterConfig>,
    pub sde: Option<SdeConfig>,
    pub fpe: Option<FpeConfig>,
    pub doi: Option<DoiConfig>,
    pub ssa: Option<SsaConfig>,
    pub perturb: Option<PerturbConfig>,
    pub rateloop: Option<RateLoopConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
    pub steps: usize,
    /// Reporting times; defaults to every grid point.
    pub outputs: Option<Vec<f64>>,
    /// Grading exponent for a grid clustered at `t0`.
    pub graded: Option<f64>,
}

impl TimeConfig {
    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        match self.graded {
            Some(p) => TimeGrid::graded(self.t0, self.tf, self.steps, p),
            None => make_time_grid(self.t0, self.tf, self.steps),
        }
        .map_err(CliError::model)
    }

    pub fn output_times(&self) -> Result<Vec<f64>, CliError> {
        let times = match &self.outputs {
            Some(t) => t.clone(),
            None => self.grid()?.points().to_vec(),
        };
        if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] >= 0.0) {
            return Err(CliError::ModelInvalid(
                "output times must be non-negative and strictly increasing".into(),
            ));
        }
        Ok(times)
    }
}

/// Either a named preset or explicit channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterConfig {
    pub preset: Option<Preset>,
    #[serde(default)]
    pub channels: Vec<ReactionChannel>,
}

impl MasterConfig {
    pub fn spec(&self) -> Result<MasterSpec, CliError> {
        let spec = match (self.preset, self.channels.is_empty()) {
            (Some(p), true) => MasterSpec::from_preset(p),
            (None, false) => MasterSpec::from_channels(self.channels.clone()),
            (Some(_), false) => {
                return Err(CliError::ModelInvalid("give either a preset or channels, not both".into()))
            }
            (None, true) => return Err(CliError::ModelInvalid("master model has no channels".into())),
        };
        spec.validate().map_err(CliError::model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    EulerMaruyama,
    Heun,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::EulerMaruyama => Scheme::EulerMaruyama,
            SchemeName::Heun => Scheme::Heun,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub n_traj: u64,
    #[serde(default)]
    pub phi0: f64,
    /// Gaussian spread of the initial value; zero means a point start.
    #[serde(default)]
    pub phi0_std: f64,
    /// Defaults to the scheme matching the model's interpretation.
    pub scheme: Option<SchemeName>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpeConfig {
    pub phi_min: f64,
    pub phi_max: f64,
    pub n_cells: usize,
    #[serde(default)]
    pub phi0: f64,
    /// Also write the density at the last output time.
    #[serde(default)]
    pub write_pdf: bool,
    #[serde(default)]
    pub dump_generator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoiConfig {
    pub truncation: usize,
    pub n0: usize,
    /// Evolve in the shifted (`a† -> a† + 1`) representation.
    #[serde(default)]
    pub shifted: bool,
    #[serde(default)]
    pub dump_matrix: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsaConfig {
    pub n_traj: u64,
    pub n0: u64,
    #[serde(default)]
    pub histograms: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationName {
    #[default]
    Shifted,
    Unshifted,
}

impl From<RepresentationName> for Representation {
    fn from(r: RepresentationName) -> Self {
        match r {
            RepresentationName::Shifted => Representation::Shifted,
            RepresentationName::Unshifted => Representation::Unshifted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub truncation: usize,
    pub n0: usize,
    pub max_order: usize,
    #[serde(default)]
    pub representation: RepresentationName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLoopConfig {
    pub lambda: f64,
    pub diffusion: f64,
    #[serde(default = "default_dim")]
    pub dim: u32,
    pub a0: f64,
    #[serde(default = "default_loop_scale")]
    pub loop_scale: f64,
}

fn default_dim() -> u32 {
    1
}

fn default_loop_scale() -> f64 {
    1.0
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))
    }

    /// Raw text and parsed form; the text goes into the run manifest.
    pub fn load(path: &Path) -> Result<(String, Self), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse(&text)?;
        Ok((text, cfg))
    }

    pub fn time(&self) -> Result<&TimeConfig, CliError> {
        self.time.as_ref().ok_or(CliError::MissingSection("time"))
    }

    pub fn langevin(&self) -> Result<LangevinSpec, CliError> {
        self.langevin
            .clone()
            .ok_or(CliError::MissingSection("langevin"))?
            .validate()
            .map_err(CliError::model)
    }

    pub fn master(&self) -> Result<MasterSpec, CliError> {
        self.master.as_ref().ok_or(CliError::MissingSection("master"))?.spec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_and_channels_parse() {
        let cfg = Config::parse(
            r#"
[master]
preset = { kind = "verhulst", beta = 1.0, lambda = 2.0, gamma = 0.1 }
"#,
        )
        .unwrap();
        assert_eq!(cfg.master().unwrap(), MasterSpec::verhulst(1.0, 2.0, 0.1));

        let cfg = Config::parse(
            r#"
[master]
channels = [{ delta = -1, rate_poly = [0.0, 1.5] }]
"#,
        )
        .unwrap();
        assert_eq!(cfg.master().unwrap(), MasterSpec::pure_death(1.5));
    }

    #[test]
    fn rejects_unknown_fields_and_bad_models() {
        assert!(matches!(Config::parse("bogus = 1"), Err(CliError::ConfigParse(_))));
        let cfg = Config::parse(
            r#"
[master]
channels = [{ delta = -1, rate_poly = [1.0] }]
"#,
        )
        .unwrap();
        assert!(matches!(cfg.master(), Err(CliError::ModelInvalid(_))));
        assert!(matches!(cfg.langevin(), Err(CliError::MissingSection("langevin"))));
    }

    #[test]
    fn output_times_default_to_grid() {
        let t = TimeConfig {
            t0: 0.0,
            tf: 1.0,
            steps: 4,
            outputs: None,
            graded: None,
        };
        assert_eq!(t.output_times().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let bad = TimeConfig {
            outputs: Some(vec![1.0, 0.5]),
            ..t
        };
        assert!(bad.output_times().is_err());
    }
}
