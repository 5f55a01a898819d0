//! Equivalent representations of scalar stochastic systems.
//!
//! The same process can be computed as a Langevin equation ([`sde`]), a
//! Fokker-Planck equation ([`fpe`]), a master equation sampled by Gillespie's
//! method ([`ssa`]) or solved in Doi's Fock-space form ([`doi`]), an
//! interaction-picture Dyson series ([`perturbation`]), and, for pair
//! annihilation, a fluctuation-corrected rate equation ([`rate_loop`]).
//! Every path reports a [`stats::MomentSeries`] so results can be compared
//! directly.

pub mod doi;
pub mod fpe;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod perturbation;
pub mod poly;
pub mod rate_loop;
pub mod rng;
pub mod sde;
pub mod ssa;
pub mod stats;

pub use grid::{make_time_grid, TimeGrid};
pub use model::{Interpretation, LangevinSpec, MasterSpec, Preset, ReactionChannel};
pub use poly::Polynomial;
pub use rng::{rng_stream, RngStream};
pub use stats::{Estimate, MomentSeries};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
