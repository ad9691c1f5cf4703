//! Adaptive sampling for superlevel-set estimation of one-dimensional
//! Markov processes.
//!
//! Given a Markov prior on an unknown function over an interval, a bounded
//! per-point classification reward, and a cost per sample, this crate
//! computes the exact value function of the sampling problem on a
//! discretized state space and derives executable policies from it.
//!
//! The pieces fit together as follows:
//!
//! - [`history`] — observation sets and the gap partition they induce.
//! - [`prior`] — translation-invariant Markov priors (Brownian motion,
//!   compound Poisson) and their discretized bridge conditionals.
//! - [`reward`] — classification reward families and the expected reward
//!   of stopping with a given history.
//! - [`solver`] — the dynamic program over (left value, right value,
//!   gap length) producing a [`solver::ValueTable`].
//! - [`policy`] — table-greedy optimal and one-step-lookahead policies.
//! - [`sim`] — Monte Carlo policy evaluation with reproducible seeding.
//! - [`budget`] — expected-budget-constrained values via the Lagrangian
//!   dual of the cost-per-sample problem.
//! - [`oracle`] — brute-force full-history value computation on tiny
//!   grids, used to cross-check the solver.

pub mod budget;
pub mod error;
pub mod history;
pub mod oracle;
pub mod policy;
pub mod prior;
pub mod reward;
pub mod sim;
pub mod solver;
mod util;

pub use error::{Error, Result};
pub use history::{Observation, ObservationHistory};
pub use prior::{BridgeDistribution, Grid, KernelCache, PriorModel};
pub use reward::RewardSpec;
pub use sim::Scenario;
pub use solver::{Action, StopTable, ValueTable};
