//! Directional sensor network simulator.
//!
//! `n` fixed sensors rotate in place by a fixed quantum per step while `m`
//! targets random-walk inside a rectangular arena with reflecting walls.
//! Within a step sensors rotate first, then targets move; rewards are read
//! off the post-move state.

mod config;
mod reward;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, is_covered, normalize_angle, relative_polar, Pose, PolarRelation};

pub use config::EnvConfig;
pub use reward::{executor_reward, executor_reward_with_cost, team_reward, EMPTY_COVERAGE_PENALTY};
pub use trace::{metrics, read_trace_jsonl, EpisodeMetrics, EpisodeTrace, TraceRecord};

/// Observation features per sensor/target pair: `(i, j, rho, alpha)`, normalized.
pub const OBS_FEATURES: usize = 4;

/// Primitive sensor action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Action {
    /// Orientation decreases by one rotation step.
    Left,
    Stay,
    /// Orientation increases by one rotation step.
    Right,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Stay, Action::Right];

    pub fn sign(self) -> i8 {
        match self {
            Action::Left => -1,
            Action::Stay => 0,
            Action::Right => 1,
        }
    }

    /// Position in [`Action::ALL`], used as the categorical index by the executor.
    pub fn index(self) -> usize {
        (self.sign() + 1) as usize
    }

    pub fn from_index(idx: usize) -> Result<Self> {
        Action::ALL
            .get(idx)
            .copied()
            .ok_or_else(|| Error::invalid(format!("action index {idx} out of range")))
    }
}

impl From<Action> for i8 {
    fn from(a: Action) -> i8 {
        a.sign()
    }
}

impl TryFrom<i8> for Action {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Action::Left),
            0 => Ok(Action::Stay),
            1 => Ok(Action::Right),
            _ => Err(Error::invalid(format!("action {v} not in {{-1, 0, 1}}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Heading in degrees.
    pub heading: f64,
}

impl Target {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// `n x m` binary sensor-to-target assignment. Row `i` is the target set of sensor `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalMap {
    n: usize,
    m: usize,
    bits: Vec<bool>,
}

impl GoalMap {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            bits: vec![false; n * m],
        }
    }

    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                bits.push(f(i, j));
            }
        }
        Self { n, m, bits }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::shape("goal map rows have unequal length"));
        }
        let mut bits = Vec::with_capacity(n * m);
        for r in rows {
            for &b in r {
                match b {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    _ => return Err(Error::invalid(format!("goal entry {b} is not binary"))),
                }
            }
        }
        Ok(Self { n, m, bits })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.m + j] = v;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.m..(i + 1) * self.m]
    }

    /// Indices of the targets assigned to sensor `i`.
    pub fn assigned(&self, i: usize) -> Vec<usize> {
        self.row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect()
    }

    /// Row-major flattening, pair `(i, j)` at `i * m + j`.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|&b| b as u8).collect())
            .collect()
    }
}

/// Normalized joint observation, an `n x m` grid of 4-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    n: usize,
    m: usize,
    entries: Vec<[f64; OBS_FEATURES]>,
}

impl Observation {
    pub fn from_entries(n: usize, m: usize, entries: Vec<[f64; OBS_FEATURES]>) -> Result<Self> {
        if entries.len() != n * m {
            return Err(Error::shape(format!(
                "observation has {} entries, expected {n}x{m}",
                entries.len()
            )));
        }
        Ok(Self { n, m, entries })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n, self.m, OBS_FEATURES)
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64; OBS_FEATURES] {
        &self.entries[i * self.m + j]
    }

    /// Rows of sensor `i`, one per target.
    pub fn sensor_rows(&self, i: usize) -> &[[f64; OBS_FEATURES]] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    /// Pair rows in row-major order (`j` fastest).
    pub fn entries(&self) -> &[[f64; OBS_FEATURES]] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub team_reward: f64,
    pub covered: Vec<bool>,
    /// `|shortest rotation| / rotation_step` for each sensor.
    pub per_sensor_cost: Vec<f64>,
    pub done: bool,
}

impl StepResult {
    pub fn coverage_rate(&self) -> f64 {
        self.covered.iter().filter(|&&c| c).count() as f64 / self.covered.len() as f64
    }
}

/// Ground-truth simulator state.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub sensors: Vec<Pose>,
    pub targets: Vec<Target>,
    pub t: usize,
    rng: ChaCha8Rng,
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.sensors == other.sensors
            && self.targets == other.targets
            && self.t == other.t
            && self.rng == other.rng
    }
}

impl WorldState {
    /// Fresh episode drawn from `config.seed`.
    pub fn reset(config: &EnvConfig) -> Result<(Self, Observation)> {
        Self::reset_with_seed(config, config.seed)
    }

    pub fn reset_with_seed(config: &EnvConfig, seed: u64) -> Result<(Self, Observation)> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (config.arena_width, config.arena_height);
        let sensors = (0..config.n_sensors)
            .map(|_| {
                let x = rng.random_range(0.0..=w);
                let y = rng.random_range(0.0..=h);
                let d = uniform_angle(&mut rng);
                Pose::new(x, y, d)
            })
            .collect::<Result<Vec<_>>>()?;
        let targets = (0..config.n_targets)
            .map(|_| Target {
                x: rng.random_range(0.0..=w),
                y: rng.random_range(0.0..=h),
                speed: rng.random_range(0.0..=config.max_target_speed),
                heading: uniform_angle(&mut rng),
            })
            .collect();
        let state = Self {
            sensors,
            targets,
            t: 0,
            rng,
        };
        let obs = state.observe(config);
        Ok((state, obs))
    }

    /// Builds a state from explicit poses, for tests and hand-made instances.
    pub fn from_parts(sensors: Vec<Pose>, targets: Vec<Target>, seed: u64) -> Self {
        Self {
            sensors,
            targets,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn relation(&self, i: usize, j: usize) -> PolarRelation {
        // Coordinates are finite by construction.
        relative_polar(&self.sensors[i], self.targets[j].position())
            .expect("finite simulator coordinates")
    }

    pub fn covers(&self, i: usize, j: usize, config: &EnvConfig) -> bool {
        is_covered(&self.relation(i, j), config.rho_max, config.alpha_max)
    }

    /// `I_j` for every target.
    pub fn covered_flags(&self, config: &EnvConfig) -> Vec<bool> {
        (0..self.targets.len())
            .map(|j| (0..self.sensors.len()).any(|i| self.covers(i, j, config)))
            .collect()
    }

    pub fn observe(&self, config: &EnvConfig) -> Observation {
        let n = self.sensors.len();
        let m = self.targets.len();
        let mut entries = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                let rel = self.relation(i, j);
                entries.push([
                    (i + 1) as f64 / n as f64,
                    (j + 1) as f64 / m as f64,
                    rel.rho / config.rho_max,
                    rel.alpha / 180.0,
                ]);
            }
        }
        Observation { n, m, entries }
    }

    pub fn is_done(&self, config: &EnvConfig) -> bool {
        self.t >= config.episode_length
    }

    /// Advances one primitive step.
    pub fn step(&mut self, config: &EnvConfig, actions: &[Action]) -> Result<StepResult> {
        if actions.len() != self.sensors.len() {
            return Err(Error::invalid(format!(
                "got {} actions for {} sensors",
                actions.len(),
                self.sensors.len()
            )));
        }
        if self.is_done(config) {
            return Err(Error::State(format!(
                "episode finished at t={}",
                self.t
            )));
        }

        let mut per_sensor_cost = Vec::with_capacity(actions.len());
        for (sensor, action) in self.sensors.iter_mut().zip(actions) {
            let before = sensor.delta();
            sensor.rotate(f64::from(action.sign()) * config.rotation_step)?;
            per_sensor_cost.push(angle_diff(sensor.delta(), before).abs() / config.rotation_step);
        }

        self.move_targets(config)?;
        self.t += 1;

        let covered = self.covered_flags(config);
        Ok(StepResult {
            observation: self.observe(config),
            team_reward: reward::team_reward_from_flags(&covered),
            covered,
            per_sensor_cost,
            done: self.is_done(config),
        })
    }

    fn move_targets(&mut self, config: &EnvConfig) -> Result<()> {
        let noise = Normal::new(0.0, config.heading_noise_sigma)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let (w, h) = (config.arena_width, config.arena_height);
        for target in &mut self.targets {
            let mut heading = target.heading + noise.sample(&mut self.rng);
            let rad = heading.to_radians();
            let mut x = target.x + target.speed * rad.cos();
            let mut y = target.y + target.speed * rad.sin();
            if x < 0.0 {
                x = -x;
                heading = 180.0 - heading;
            } else if x > w {
                x = 2.0 * w - x;
                heading = 180.0 - heading;
            }
            if y < 0.0 {
                y = -y;
                heading = -heading;
            } else if y > h {
                y = 2.0 * h - y;
                heading = -heading;
            }
            target.x = x.clamp(0.0, w);
            target.y = y.clamp(0.0, h);
            target.heading = normalize_angle(heading)?;
        }
        Ok(())
    }
}

fn uniform_angle(rng: &mut ChaCha8Rng) -> f64 {
    // (-180, 180]
    180.0 - rng.random_range(0.0..360.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_sensor(delta: f64) -> (WorldState, EnvConfig) {
        let cfg = EnvConfig {
            n_sensors: 1,
            n_targets: 1,
            max_target_speed: 0.0,
            ..EnvConfig::default()
        };
        let s = WorldState::from_parts(
            vec![Pose::new(500.0, 500.0, delta).unwrap()],
            vec![Target { x: 600.0, y: 500.0, speed: 0.0, heading: 0.0 }],
            0,
        );
        (s, cfg)
    }

    #[test]
    fn reset_is_deterministic() {
        let cfg = EnvConfig { seed: 7, ..EnvConfig::default() };
        let (a, oa) = WorldState::reset(&cfg).unwrap();
        let (b, ob) = WorldState::reset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
    }

    #[test]
    fn observation_shapes() {
        let cfg = EnvConfig::default().with_counts(4, 5);
        let (_, obs) = WorldState::reset(&cfg).unwrap();
        assert_eq!(obs.shape(), (4, 5, 4));
        let cfg = EnvConfig::default().with_counts(1, 1);
        let (_, obs) = WorldState::reset(&cfg).unwrap();
        assert_eq!(obs.shape(), (1, 1, 4));
    }

    #[test]
    fn zero_area_arena_rejected() {
        let cfg = EnvConfig { arena_width: 0.0, ..EnvConfig::default() };
        assert!(matches!(WorldState::reset(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rotation_examples() {
        let (mut s, cfg) = one_sensor(0.0);
        s.step(&cfg, &[Action::Right]).unwrap();
        assert_eq!(s.sensors[0].delta(), 5.0);

        let (mut s, cfg) = one_sensor(33.0);
        let r = s.step(&cfg, &[Action::Stay]).unwrap();
        assert_eq!(s.sensors[0].delta(), 33.0);
        assert_eq!(r.per_sensor_cost, vec![0.0]);

        let (mut s, cfg) = one_sensor(-178.0);
        let r = s.step(&cfg, &[Action::Left]).unwrap();
        assert!((s.sensors[0].delta() - 177.0).abs() < 1e-12);
        assert!((r.per_sensor_cost[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_errors() {
        let (mut s, cfg) = one_sensor(0.0);
        assert!(matches!(
            s.step(&cfg, &[Action::Stay, Action::Stay]),
            Err(Error::InvalidArgument(_))
        ));
        let cfg = EnvConfig { episode_length: 1, ..cfg };
        let r = s.step(&cfg, &[Action::Stay]).unwrap();
        assert!(r.done);
        assert!(matches!(s.step(&cfg, &[Action::Stay]), Err(Error::State(_))));
    }

    #[test]
    fn action_codes() {
        for a in Action::ALL {
            assert_eq!(Action::try_from(a.sign()).unwrap(), a);
            assert_eq!(Action::from_index(a.index()).unwrap(), a);
        }
        assert!(Action::try_from(2).is_err());
        assert_eq!(serde_json::to_string(&Action::Left).unwrap(), "-1");
    }

    #[test]
    fn goal_map_rows() {
        let g = GoalMap::from_rows(&[vec![1, 0, 1], vec![0, 0, 0]]).unwrap();
        assert_eq!(g.assigned(0), vec![0, 2]);
        assert!(g.assigned(1).is_empty());
        assert_eq!(g.to_rows(), vec![vec![1, 0, 1], vec![0, 0, 0]]);
        assert!(GoalMap::from_rows(&[vec![2]]).is_err());
    }

    proptest! {
        #[test]
        fn targets_stay_in_arena(seed in 0u64..1000, speed in 0.0f64..200.0) {
            let cfg = EnvConfig {
                seed,
                max_target_speed: speed,
                episode_length: 60,
                ..EnvConfig::default()
            };
            let (mut s, _) = WorldState::reset(&cfg).unwrap();
            let acts = vec![Action::Right; cfg.n_sensors];
            while !s.is_done(&cfg) {
                let r = s.step(&cfg, &acts).unwrap();
                for t in &s.targets {
                    prop_assert!((0.0..=cfg.arena_width).contains(&t.x));
                    prop_assert!((0.0..=cfg.arena_height).contains(&t.y));
                }
                for e in r.observation.entries() {
                    prop_assert!(e[2] >= 0.0);
                    prop_assert!(e[3] > -1.0 && e[3] <= 1.0);
                }
            }
        }
    }
}
