//! Episode runners, evaluation summaries and generalization sweeps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    distance_goal_generation, ilp_actions, random_action, random_goal, scripted_joint_action,
};
use crate::env::{metrics, Action, EnvConfig, EpisodeMetrics, EpisodeTrace, GoalMap, WorldState};
use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::policy::{CoordinatorNet, Sampling};
use crate::training::FrozenExecutor;

const EVAL_ENV_STREAM: u64 = 11;
const EVAL_POLICY_STREAM: u64 = 12;

/// Seed of the `episode`-th evaluation world under base `seed`.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    crate::training::derive_seed(seed, EVAL_ENV_STREAM, episode)
}

fn policy_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::training::derive_seed(seed, EVAL_POLICY_STREAM, episode))
}

/// Flat policies that need no training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Uniform primitive actions.
    Random,
    /// Distance goals followed by scripted executors.
    Scripted,
    /// Per-step exact coverage assignment.
    Ilp,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "scripted" => Ok(Self::Scripted),
            "ilp" => Ok(Self::Ilp),
            other => Err(Error::Usage(format!(
                "unknown policy {other:?} (expected random, scripted or ilp)"
            ))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Scripted => "scripted",
            Self::Ilp => "ilp",
        })
    }
}

/// How the coordinator level chooses goals.
#[derive(Debug, Clone)]
pub enum GoalSource {
    /// Learned coordinator, thresholding assignment probabilities at 0.5.
    Learned(CoordinatorNet, ParamStore),
    /// Independent fair coin per pair.
    Random,
    /// Every target within range of the sensor.
    Distance,
}

/// Anything that can drive every sensor for one step.
pub trait Controller {
    /// Joint action for the current state, plus the goal map in force (if any).
    fn act(
        &mut self,
        state: &WorldState,
        env: &EnvConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<Action>, Option<GoalMap>)>;
}

impl Controller for Policy {
    fn act(
        &mut self,
        state: &WorldState,
        env: &EnvConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<Action>, Option<GoalMap>)> {
        Ok(match self {
            Self::Random => ((0..state.sensors.len()).map(|_| random_action(rng)).collect(), None),
            Self::Scripted => {
                let goal = distance_goal_generation(state, env);
                (scripted_joint_action(state, &goal, env), Some(goal))
            }
            Self::Ilp => (ilp_actions(state, env), None),
        })
    }
}

/// Goals refreshed every `k` steps and carried out by fixed executors.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub goals: GoalSource,
    pub executor: FrozenExecutor,
    current: Option<GoalMap>,
}

impl Hierarchy {
    pub fn new(goals: GoalSource, executor: FrozenExecutor) -> Self {
        Self {
            goals,
            executor,
            current: None,
        }
    }
}

impl Controller for Hierarchy {
    fn act(
        &mut self,
        state: &WorldState,
        env: &EnvConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<Action>, Option<GoalMap>)> {
        let k = env.macro_interval.max(1);
        if state.t.is_multiple_of(k) || self.current.is_none() {
            let (n, m) = (state.sensors.len(), state.targets.len());
            self.current = Some(match &self.goals {
                GoalSource::Learned(net, store) => {
                    let obs = state.observe(env);
                    net.decide(store, &obs, Sampling::Greedy, rng)?.goal
                }
                GoalSource::Random => random_goal(n, m, rng),
                GoalSource::Distance => distance_goal_generation(state, env),
            });
        }
        let goal = self.current.clone().expect("set above");
        let actions = self.executor.actions(state, &goal, env)?;
        Ok((actions, Some(goal)))
    }
}

/// Plays evaluation episode `episode` and returns its full trace.
pub fn run_episode<C: Controller + ?Sized>(
    env: &EnvConfig,
    seed: u64,
    episode: u64,
    controller: &mut C,
) -> Result<EpisodeTrace> {
    let (mut state, _) = WorldState::reset_with_seed(env, episode_seed(seed, episode))?;
    let mut rng = policy_rng(seed, episode);
    let mut trace = EpisodeTrace::new();
    while !state.is_done(env) {
        let (actions, goal) = controller.act(&state, env, &mut rng)?;
        let result = state.step(env, &actions)?;
        trace.push(episode as usize, &state, &actions, goal.as_ref(), &result);
    }
    Ok(trace)
}

/// Mean and population standard deviation of CR and AG over episodes.
///
/// Episodes whose AG is infinite (no rotation at all) are left out of the AG
/// statistics and counted in `ag_infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub cr_mean: f64,
    pub cr_std: f64,
    pub ag_mean: f64,
    pub ag_std: f64,
    pub ag_infinite: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Summary {
    pub fn from_metrics(per_episode: &[EpisodeMetrics]) -> Result<Self> {
        if per_episode.is_empty() {
            return Err(Error::invalid("summary of zero episodes"));
        }
        let cr: Vec<f64> = per_episode.iter().map(|m| m.coverage_rate).collect();
        let ag: Vec<f64> = per_episode
            .iter()
            .map(|m| m.average_gain)
            .filter(|g| g.is_finite())
            .collect();
        let (cr_mean, cr_std) = mean_std(&cr);
        let (ag_mean, ag_std) = mean_std(&ag);
        Ok(Self {
            episodes: per_episode.len(),
            cr_mean,
            cr_std,
            ag_mean,
            ag_std,
            ag_infinite: per_episode.len() - ag.len(),
        })
    }
}

/// Runs `episodes` evaluation episodes; `on_trace` sees every trace as it completes.
pub fn evaluate<C, F>(
    env: &EnvConfig,
    seed: u64,
    episodes: u64,
    controller: &mut C,
    mut on_trace: F,
) -> Result<Summary>
where
    C: Controller + ?Sized,
    F: FnMut(&EpisodeTrace) -> Result<()>,
{
    let mut per_episode = Vec::with_capacity(episodes as usize);
    for e in 0..episodes {
        let trace = run_episode(env, seed, e, controller)?;
        per_episode.push(metrics(&trace)?);
        on_trace(&trace)?;
    }
    Summary::from_metrics(&per_episode)
}

/// Which count a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Targets,
    Sensors,
}

/// An inclusive range of sensor or target counts, written `targets=3..7`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub from: usize,
    pub to: usize,
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("malformed sweep {s:?} (expected e.g. targets=3..7)"));
        let (axis, range) = s.split_once('=').ok_or_else(bad)?;
        let axis = match axis.trim() {
            "targets" => SweepAxis::Targets,
            "sensors" => SweepAxis::Sensors,
            _ => return Err(bad()),
        };
        let (from, to) = range.split_once("..").ok_or_else(bad)?;
        let from: usize = from.trim().parse().map_err(|_| bad())?;
        let to: usize = to.trim().parse().map_err(|_| bad())?;
        if from == 0 || from > to {
            return Err(bad());
        }
        Ok(Self { axis, from, to })
    }
}

impl Sweep {
    /// Parses an optional sweep; an empty string means no sweep.
    pub fn parse_optional(s: &str) -> Result<Option<Self>> {
        if s.trim().is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some)
        }
    }

    /// One environment per swept count, everything else taken from `base`.
    pub fn settings(&self, base: &EnvConfig) -> Vec<EnvConfig> {
        (self.from..=self.to)
            .map(|c| match self.axis {
                SweepAxis::Targets => base.clone().with_counts(base.n_sensors, c),
                SweepAxis::Sensors => base.clone().with_counts(c, base.n_targets),
            })
            .collect()
    }
}

/// One line of an evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub policy: String,
    pub n_sensors: usize,
    pub n_targets: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

pub const EVAL_HEADER: &str =
    "policy,n_sensors,n_targets,episodes,cr_mean,cr_std,ag_mean,ag_std,ag_infinite";

pub fn write_eval_csv<W: Write>(mut out: W, rows: &[EvalRow], manifest: Option<&str>) -> Result<()> {
    match manifest {
        Some(_) => writeln!(out, "{EVAL_HEADER},manifest")?,
        None => writeln!(out, "{EVAL_HEADER}")?,
    }
    for r in rows {
        let s = &r.summary;
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.policy, r.n_sensors, r.n_targets, s.episodes, s.cr_mean, s.cr_std, s.ag_mean, s.ag_std, s.ag_infinite
        )?;
        match manifest {
            Some(h) => writeln!(out, ",{h}")?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

/// Evaluates `hierarchy` and the exact-coverage reference on every setting of
/// `sweep` (or just `base` without one). HiT-MAC rows come first, then ILP rows.
pub fn run_sweep(
    base: &EnvConfig,
    sweep: Option<&Sweep>,
    seed: u64,
    episodes: u64,
    hierarchy: &Hierarchy,
) -> Result<Vec<EvalRow>> {
    let settings = match sweep {
        Some(s) => s.settings(base),
        None => vec![base.clone()],
    };
    let mut learned = Vec::new();
    let mut reference = Vec::new();
    for env in &settings {
        env.validate()?;
        let mut h = hierarchy.clone();
        let summary = evaluate(env, seed, episodes, &mut h, |_| Ok(()))?;
        learned.push(EvalRow {
            policy: "hitmac".into(),
            n_sensors: env.n_sensors,
            n_targets: env.n_targets,
            summary,
        });
        let summary = evaluate(env, seed, episodes, &mut Policy::Ilp, |_| Ok(()))?;
        reference.push(EvalRow {
            policy: "ilp".into(),
            n_sensors: env.n_sensors,
            n_targets: env.n_targets,
            summary,
        });
    }
    learned.extend(reference);
    Ok(learned)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_env() -> EnvConfig {
        EnvConfig {
            episode_length: 20,
            ..EnvConfig::default().with_counts(2, 3)
        }
    }

    #[test]
    fn policy_names() {
        for p in [Policy::Random, Policy::Scripted, Policy::Ilp] {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert!(matches!("greedy".parse::<Policy>(), Err(Error::Usage(_))));
    }

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "targets=3..7".parse().unwrap();
        assert_eq!((s.axis, s.from, s.to), (SweepAxis::Targets, 3, 7));
        let settings = s.settings(&EnvConfig::default());
        assert_eq!(settings.len(), 5);
        assert!(settings.iter().all(|e| e.n_sensors == 4));
        assert_eq!(settings[4].n_targets, 7);

        let s: Sweep = "sensors=2..6".parse().unwrap();
        let settings = s.settings(&EnvConfig::default());
        assert_eq!(settings.iter().map(|e| e.n_sensors).collect::<Vec<_>>(), vec![2, 3, 4, 5, 6]);
        assert!(settings.iter().all(|e| e.n_targets == 5));

        assert_eq!(Sweep::parse_optional("").unwrap(), None);
        for bad in ["targets", "agents=1..2", "targets=5..3", "targets=0..2", "targets=a..b"] {
            assert!(matches!(bad.parse::<Sweep>(), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn summary_statistics() {
        let m = |cr, ag| EpisodeMetrics {
            coverage_rate: cr,
            mean_cost: 1.0,
            average_gain: ag,
        };
        let s = Summary::from_metrics(&[m(0.2, 1.0), m(0.4, 3.0), m(0.6, f64::INFINITY)]).unwrap();
        assert!((s.cr_mean - 0.4).abs() < 1e-15);
        assert!((s.cr_std - (0.08f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!((s.ag_mean, s.ag_std, s.ag_infinite), (2.0, 1.0, 1));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let env = small_env();
        for p in [Policy::Random, Policy::Scripted, Policy::Ilp] {
            let a = evaluate(&env, 5, 3, &mut p.clone(), |_| Ok(())).unwrap();
            let b = evaluate(&env, 5, 3, &mut p.clone(), |_| Ok(())).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.episodes, 3);
        }
    }

    #[test]
    fn hierarchy_holds_goals_for_k_steps() {
        let env = small_env();
        let mut h = Hierarchy::new(GoalSource::Random, FrozenExecutor::Scripted);
        let trace = run_episode(&env, 1, 0, &mut h).unwrap();
        assert_eq!(trace.len(), 20);
        let goals: Vec<_> = trace.records.iter().map(|r| r.goal_map.clone().unwrap()).collect();
        for t in 1..20 {
            if t % 10 != 0 {
                assert_eq!(goals[t], goals[t - 1]);
            }
        }
    }

    #[test]
    fn sweep_table_shape() {
        let env = EnvConfig {
            episode_length: 5,
            ..EnvConfig::default()
        };
        let (net, store) = CoordinatorNet::init(8, 0).unwrap();
        let h = Hierarchy::new(GoalSource::Learned(net, store), FrozenExecutor::Scripted);
        let sweep: Sweep = "targets=3..7".parse().unwrap();
        let rows = run_sweep(&env, Some(&sweep), 0, 2, &h).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows[..5].iter().all(|r| r.policy == "hitmac"));
        assert!(rows[5..].iter().all(|r| r.policy == "ilp"));
        assert_eq!(rows.iter().map(|r| r.n_targets).collect::<Vec<_>>(), vec![3, 4, 5, 6, 7, 3, 4, 5, 6, 7]);

        let single = run_sweep(&env, None, 0, 2, &h).unwrap();
        assert_eq!(single.len(), 2);

        let mut out = Vec::new();
        write_eval_csv(&mut out, &rows, Some("h")).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.lines().skip(1).all(|l| l.split(',').count() == 10));
    }
}
