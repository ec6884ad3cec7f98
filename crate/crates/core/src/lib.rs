//! Target coverage in directional sensor networks.
//!
//! The crate bundles a seeded two-dimensional simulator of rotating sensors
//! and random-walking targets, the non-learned reference policies (a scripted
//! centroid tracker, distance-based goal generation and an exact coverage
//! solver), a small reverse-mode differentiation core with scaled dot-product
//! attention, and the two-level coordinator/executor policy trained with
//! advantage actor-critic.
//!
//! Module map:
//!
//! - [`geometry`]: angles, polar relations, the coverage predicate.
//! - [`env`]: world dynamics, observations, rewards, traces and metrics.
//! - [`baselines`]: scripted executor, goal generation, exact solver, random policies.
//! - [`nn`]: dense arrays, the computation tape, attention, checkpoints, gradient checks.
//! - [`policy`]: the coordinator and the shared goal-conditioned executor.
//! - [`training`]: returns, the actor-critic update, both training stages.
//! - [`eval`]: episode runners and parameter sweeps.
//! - [`manifest`]: run manifests and content hashes stamped on every output.
//! - [`cli`]: the `hitmac` command-line front end.

pub mod baselines;
pub mod cli;
pub mod env;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod manifest;
pub mod nn;
pub mod policy;
pub mod training;

pub use error::{Error, Result};
