//! Deterministic simulator of a decentralized online-learning network.
//!
//! Many synthetic participants submit raw inferences (a scalar return or a
//! label-probability vector) and forecasts of each other's losses. The network
//! combines them into a single inference using regret-derived weights, scores
//! every participant, and splits a reward budget across the inference,
//! forecast and reputation tasks. The [`harness`] module drives this epoch by
//! epoch and runs the parameter and composition sweeps.
//!
//! Module map:
//!
//! - [`rng`]: keyed, replayable random streams and distribution samplers.
//! - [`potential`]: the softplus potential, its gradient, regret weighting and
//!   the EMA regret ledger.
//! - [`synthesis`]: forecast-implied inferences, the network inference and
//!   weighted-percentile confidence bands.
//! - [`world`]: ground truth and synthetic participant behaviour.
//! - [`incentives`]: scores, reward fractions, entropy task split, spread.
//! - [`harness`]: epoch driver, sweeps, heatmaps, statistics and export.

pub mod error;
pub mod harness;
pub mod incentives;
pub mod potential;
pub mod rng;
pub mod stats;
pub mod synthesis;
pub mod world;

pub use error::{Error, Result};
pub use potential::{PotentialParams, RegretLedger};
pub use rng::RandomSource;
pub use synthesis::TaskKind;
