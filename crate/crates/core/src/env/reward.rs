use super::{EnvConfig, WorldState};
use crate::geometry::{angle_diff, is_covered};

/// Team reward when no target is covered at all.
pub const EMPTY_COVERAGE_PENALTY: f64 = -0.1;

/// Coverage rate of the current state, or the penalty when nothing is covered.
pub fn team_reward(state: &WorldState, config: &EnvConfig) -> f64 {
    team_reward_from_flags(&state.covered_flags(config))
}

pub(crate) fn team_reward_from_flags(covered: &[bool]) -> f64 {
    let hits = covered.iter().filter(|&&c| c).count();
    if hits == 0 {
        EMPTY_COVERAGE_PENALTY
    } else {
        hits as f64 / covered.len() as f64
    }
}

/// Goal-conditioned reward of sensor `i` after the transition `prev -> state`.
///
/// Each assigned target scores `1 - |alpha| / alpha_max` when sensor `i` covers it
/// and `-1` otherwise; the mean over the assignment (zero for an empty one) is
/// charged `cost_weight` per rotation step taken.
pub fn executor_reward(
    prev: &WorldState,
    state: &WorldState,
    i: usize,
    assigned: &[usize],
    config: &EnvConfig,
) -> f64 {
    let moved = angle_diff(state.sensors[i].delta(), prev.sensors[i].delta()).abs();
    executor_reward_with_cost(state, i, assigned, moved / config.rotation_step, config)
}

/// [`executor_reward`] with the rotation cost already known.
pub fn executor_reward_with_cost(
    state: &WorldState,
    i: usize,
    assigned: &[usize],
    cost: f64,
    config: &EnvConfig,
) -> f64 {
    let tracking = if assigned.is_empty() {
        0.0
    } else {
        let total: f64 = assigned
            .iter()
            .map(|&j| {
                let rel = state.relation(i, j);
                if is_covered(&rel, config.rho_max, config.alpha_max) {
                    1.0 - rel.alpha.abs() / config.alpha_max
                } else {
                    -1.0
                }
            })
            .sum();
        total / assigned.len() as f64
    };
    tracking - config.cost_weight * cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Target;
    use crate::geometry::Pose;
    use proptest::prelude::*;

    fn target_at(bearing_deg: f64, rho: f64) -> Target {
        let r = bearing_deg.to_radians();
        Target { x: rho * r.cos(), y: rho * r.sin(), speed: 0.0, heading: 0.0 }
    }

    #[test]
    fn team_reward_cases() {
        let cfg = EnvConfig::default().with_counts(1, 5);
        // three targets in the wedge, two behind the sensor
        let targets = vec![
            target_at(0.0, 100.0),
            target_at(10.0, 100.0),
            target_at(-10.0, 100.0),
            target_at(180.0, 100.0),
            target_at(90.0, 100.0),
        ];
        let s = WorldState::from_parts(vec![Pose::new(0.0, 0.0, 0.0).unwrap()], targets, 0);
        assert!((team_reward(&s, &cfg) - 0.6).abs() < 1e-12);

        let s = WorldState::from_parts(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![target_at(180.0, 10.0); 5],
            0,
        );
        assert_eq!(team_reward(&s, &cfg), -0.1);

        let s = WorldState::from_parts(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![target_at(1.0, 10.0); 5],
            0,
        );
        assert_eq!(team_reward(&s, &cfg), 1.0);
    }

    #[test]
    fn executor_reward_cases() {
        let cfg = EnvConfig::default().with_counts(1, 1);
        let still = WorldState::from_parts(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![target_at(0.0, 100.0)],
            0,
        );
        assert_eq!(executor_reward(&still, &still, 0, &[0], &cfg), 1.0);

        let prev = WorldState::from_parts(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![target_at(27.5, 100.0)],
            0,
        );
        let mut now = prev.clone();
        now.sensors[0].set_delta(5.0).unwrap();
        let r = executor_reward(&prev, &now, 0, &[0], &cfg);
        assert!((r - 0.49).abs() < 1e-12, "{r}");

        let far = WorldState::from_parts(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![target_at(0.0, 900.0)],
            0,
        );
        assert_eq!(executor_reward(&far, &far, 0, &[0], &cfg), -1.0);
    }

    #[test]
    fn empty_assignment_pays_only_cost() {
        let cfg = EnvConfig::default().with_counts(1, 1);
        let s = WorldState::from_parts(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![target_at(0.0, 100.0)],
            0,
        );
        assert_eq!(executor_reward_with_cost(&s, 0, &[], 0.0, &cfg), 0.0);
        assert!((executor_reward_with_cost(&s, 0, &[], 1.0, &cfg) + 0.01).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn team_reward_levels(seed in 0u64..500, n in 1usize..5, m in 1usize..7) {
            let cfg = EnvConfig { seed, ..EnvConfig::default().with_counts(n, m) };
            let (s, _) = WorldState::reset(&cfg).unwrap();
            let r = team_reward(&s, &cfg);
            let levels: Vec<f64> = (1..=m).map(|j| j as f64 / m as f64).collect();
            prop_assert!(r == -0.1 || levels.contains(&r));
        }

        #[test]
        fn zero_cost_reward_bounded(seed in 0u64..500, mask in 0u32..64) {
            let cfg = EnvConfig { seed, ..EnvConfig::default().with_counts(3, 6) };
            let (s, _) = WorldState::reset(&cfg).unwrap();
            let assigned: Vec<usize> = (0..6).filter(|j| mask >> j & 1 == 1).collect();
            for i in 0..3 {
                let r = executor_reward_with_cost(&s, i, &assigned, 0.0, &cfg);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
