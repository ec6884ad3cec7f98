//! The two-level policy.
//!
//! Every `k` steps the [`CoordinatorNet`] turns the joint observation into a
//! [`GoalMap`]; in between, each sensor runs the shared [`ExecutorNet`] on the
//! rows of its own observation that survive the [`goal_filter`].

mod coordinator;
mod executor;

use rand::Rng;

use crate::env::OBS_FEATURES;
use crate::error::{Error, Result};
use crate::nn::Matrix;

pub use crate::env::GoalMap;
pub use coordinator::{
    bernoulli_log_prob, BoundCoordinator, CoordinatorDecision, CoordinatorNet, COORDINATOR_PREFIX,
};
pub use executor::{BoundExecutor, ExecutorDecision, ExecutorNet, EXECUTOR_PREFIX};

/// Hidden width used by every layer unless overridden.
pub const DEFAULT_HIDDEN: usize = 128;

/// How a stochastic head turns probabilities into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Draw from the distribution (training).
    Stochastic,
    /// Bernoulli threshold at 0.5 / categorical argmax (evaluation).
    Greedy,
}

/// Keeps the observation rows of the assigned targets, in their original order.
///
/// The result has zero rows when nothing is assigned.
pub fn goal_filter(rows: &[[f64; OBS_FEATURES]], goal_row: &[bool]) -> Result<Matrix> {
    if rows.len() != goal_row.len() {
        return Err(Error::shape(format!(
            "{} observation rows vs {} goal bits",
            rows.len(),
            goal_row.len()
        )));
    }
    let data: Vec<f64> = rows
        .iter()
        .zip(goal_row)
        .filter(|(_, &keep)| keep)
        .flat_map(|(r, _)| r.iter().copied())
        .collect();
    Matrix::from_vec(data.len() / OBS_FEATURES, OBS_FEATURES, data)
}

pub(crate) fn bernoulli<R: Rng + ?Sized>(p: f64, sampling: Sampling, rng: &mut R) -> bool {
    match sampling {
        Sampling::Stochastic => rng.random::<f64>() < p,
        Sampling::Greedy => p > 0.5,
    }
}
