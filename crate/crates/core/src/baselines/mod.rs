//! Non-learned reference policies.

mod exact;

use rand::Rng;

use crate::env::{Action, EnvConfig, GoalMap, WorldState};
use crate::error::{Error, Result};
use crate::geometry::{bearing, normalize_angle};

pub use exact::{
    exact_coverage_assignment, ilp_actions, CoverageInstance, DirectionAssignment, DIRECTIONS,
};

/// Action of the scripted tracker for a given angle error `beta` (degrees).
///
/// Floor division, then clipped to one rotation step either way.
pub fn scripted_action_from_error(beta: f64, rotation_step: f64) -> Action {
    let steps = (beta / rotation_step).floor().clamp(-1.0, 1.0);
    if steps > 0.0 {
        Action::Right
    } else if steps < 0.0 {
        Action::Left
    } else {
        Action::Stay
    }
}

/// Angle error between sensor `i`'s heading and the centroid of its assigned targets.
///
/// `None` for an empty assignment or a centroid on top of the sensor.
pub fn centroid_error(state: &WorldState, i: usize, assigned: &[usize]) -> Option<f64> {
    if assigned.is_empty() {
        return None;
    }
    let k = assigned.len() as f64;
    let (sx, sy) = assigned.iter().fold((0.0, 0.0), |(ax, ay), &j| {
        let t = &state.targets[j];
        (ax + t.x, ay + t.y)
    });
    let sensor = &state.sensors[i];
    let (dx, dy) = (sx / k - sensor.x, sy / k - sensor.y);
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    normalize_angle(bearing(dx, dy) - sensor.delta()).ok()
}

/// Scripted executor: turn toward the centroid of the assigned targets.
/// An empty assignment stays put.
pub fn scripted_executor_action(
    state: &WorldState,
    i: usize,
    assigned: &[usize],
    config: &EnvConfig,
) -> Action {
    match centroid_error(state, i, assigned) {
        Some(beta) => scripted_action_from_error(beta, config.rotation_step),
        None => Action::Stay,
    }
}

/// Scripted actions for every sensor under a goal map.
pub fn scripted_joint_action(state: &WorldState, goals: &GoalMap, config: &EnvConfig) -> Vec<Action> {
    (0..state.sensors.len())
        .map(|i| scripted_executor_action(state, i, &goals.assigned(i), config))
        .collect()
}

/// Assigns every target closer than `rho_max`, regardless of bearing.
pub fn distance_goal_generation(state: &WorldState, config: &EnvConfig) -> GoalMap {
    GoalMap::from_fn(state.sensors.len(), state.targets.len(), |i, j| {
        state.relation(i, j).rho < config.rho_max
    })
}

/// Maps a 1-based direction index (or none) to the primitive action that heads there.
///
/// Directions are numbered in the direction of increasing orientation, so the
/// second is reached by turning right and the fourth by turning left. The
/// opposite direction is reached by turning right.
pub fn direction_to_action(direction: Option<usize>) -> Result<Action> {
    match direction {
        None | Some(1) => Ok(Action::Stay),
        Some(2) | Some(3) => Ok(Action::Right),
        Some(4) => Ok(Action::Left),
        Some(j) => Err(Error::invalid(format!("direction {j} not in 1..=4"))),
    }
}

/// I.i.d. Bernoulli(1/2) assignment.
pub fn random_goal<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> GoalMap {
    GoalMap::from_fn(n, m, |_, _| rng.random_bool(0.5))
}

pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::ALL[rng.random_range(0..3)]
}
