//! Conformal off-policy evaluation for tabular finite-horizon MDPs.
//!
//! Builds prediction intervals for the return of a target policy from
//! trajectories collected under a behavior policy, using weighted split
//! conformal prediction with pinball, double-quantile and shifted-values
//! scores. Exact dynamic-programming oracles and an importance-sampling
//! bootstrap baseline are included for comparison.

pub mod baseline;
pub mod conformal;
pub mod error;
pub mod experiment;
pub mod inventory;
pub mod mdp;
pub mod quantile;
pub mod report;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
