//! Episodic bandits-with-knapsacks toolkit.
//!
//! A decision maker repeatedly runs a finite-horizon resource-allocation
//! episode: requests arrive with contexts, an allocation either converts
//! (earning reward, consuming budget) or not, and the leftover budget is
//! scrapped at episode end. This crate provides
//!
//! - [`model`]: the environment tuple and one-step simulation dynamics;
//! - [`exact_dp`]: exact backward induction and the fluid upper bound;
//! - [`oracles`] / [`glm`]: confidence-bound oracles over the conversion
//!   model (per-action counts, linear and logistic regression);
//! - [`schedule`] / [`agent`]: the optimistic online learner with lazy
//!   updates and split data stores;
//! - [`environments`]: pricing, procurement, and auction builders plus the
//!   two benchmark instances;
//! - [`harness`]: seeded multi-repetition experiments, baselines, and
//!   CSV/SVG emission.
//!
//! Data-parallel loops use rayon under the default `parallel` feature and
//! fall back to sequential iteration without it; results are bit-identical
//! either way.

pub mod agent;
pub mod environments;
pub mod exact_dp;
pub mod glm;
pub mod harness;
pub mod model;
pub mod oracles;
mod par;
pub mod schedule;

pub use par::mode as execution_mode;
