//! Differential temporal-difference learning for episodic and continuing
//! finite MDPs.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`mdp`]: exact tabular models, chain views, dynamic programming and
//!   Markov-chain diagnostics. These are the ground-truth oracles.
//! * [`shaping`]: constant-potential reward shaping, including the terminal
//!   case and state-dependent discounting.
//! * [`linear`]: expanded-feature mean-field systems, fixed points and
//!   spectral checks.
//! * [`agents`]: Q-learning, generalized differential Q-learning, differential
//!   TD prediction and the linear expanded-feature update.
//! * [`envs`]: grid worlds, diagnostic MDPs and sampling.
//! * [`experiments`]: seeded trials, sweeps, aggregation and export.
//! * [`checks`]: the invariant suite behind `difftd verify`.
//!
//! Numerical code is generic over a [`Scalar`]; the aliases at the crate root
//! fix it to `f64`, which is what every tolerance in the test-suite is
//! calibrated for.

pub mod agents;
pub mod checks;
pub mod envs;
pub mod error;
pub mod experiments;
pub mod linear;
pub mod mdp;
mod scalar;
pub mod shaping;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision MDP.
pub type Mdp = mdp::TabularMdp<f64>;
/// Double-precision policy.
pub type Policy = mdp::PolicyTable<f64>;
/// Double-precision chain view.
pub type Chain = mdp::ChainView<f64>;
/// Double-precision expanded feature set.
pub type Features = linear::FeatureSet<f64>;
/// Double-precision mean-field system.
pub type System = linear::MeanFieldSystem<f64>;
/// Double-precision potential.
pub type Potential = shaping::PotentialSpec<f64>;
/// Tabular action-value agent in double precision.
pub type QAgent = agents::AgentState<f64, agents::QTable<f64>>;
/// Tabular state-value predictor in double precision.
pub type TdAgent = agents::AgentState<f64, Vec<f64>>;
/// Linear expanded-feature predictor in double precision.
pub type LinearAgent = agents::AgentState<f64, nalgebra::DVector<f64>>;
