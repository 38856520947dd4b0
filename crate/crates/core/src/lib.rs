//! Stochastic autocatalytic reaction networks with inflow and outflow.
//!
//! - [`model`]: networks, states, propensities, the generator.
//! - [`analytic`]: Poisson mixtures of Dirichlet-multinomial / uniform-simplex laws.
//! - [`simulate`]: exact SSA, ensembles, lumped paths, switching statistics.
//! - [`verify`]: balance residuals, lumpability, a truncated-generator oracle, drift certificates.
//! - [`scaling`]: volume sweeps and critical volumes.

pub mod analytic;
pub mod error;
pub mod model;
pub mod rng;
pub mod scaling;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use model::{create_network, ReactionNetwork, State, Topology, Transition, TransitionKind};
