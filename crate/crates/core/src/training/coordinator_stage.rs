use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::executor_stage::{ENV_STREAM, POLICY_STREAM};
use super::workers::{self, EpisodeLosses, Hub};
use super::{
    compute_returns, derive_seed, CoordinatorTransition, ExecutorSource, ProgressRow, Segment,
    TrainConfig, TrainResult,
};
use crate::baselines::scripted_joint_action;
use crate::env::{Action, EnvConfig, GoalMap, WorldState};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, ParamStore};
use crate::policy::{goal_filter, CoordinatorNet, ExecutorNet, Sampling, EXECUTOR_PREFIX};

/// Executors that stay fixed while the coordinator trains or is evaluated.
#[derive(Debug, Clone)]
pub enum FrozenExecutor {
    Scripted,
    /// Learned network, acting greedily.
    Learned(ExecutorNet, ParamStore),
}

impl FrozenExecutor {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let store = ParamStore::from_checkpoint(ckpt, EXECUTOR_PREFIX)?;
        Ok(Self::Learned(ExecutorNet::from_store(&store)?, store))
    }

    pub fn resolve(source: &ExecutorSource) -> Result<Self> {
        match source {
            ExecutorSource::Scripted => Ok(Self::Scripted),
            ExecutorSource::Checkpoint(path) => Self::from_checkpoint(&Checkpoint::load(path)?),
        }
    }

    /// Joint primitive action under `goals`.
    pub fn actions(&self, state: &WorldState, goals: &GoalMap, env: &EnvConfig) -> Result<Vec<Action>> {
        match self {
            Self::Scripted => Ok(scripted_joint_action(state, goals, env)),
            Self::Learned(net, store) => {
                let obs = state.observe(env);
                // Greedy decisions never touch the generator.
                let mut unused = ChaCha8Rng::seed_from_u64(0);
                (0..state.sensors.len())
                    .map(|i| {
                        let rows = goal_filter(obs.sensor_rows(i), goals.row(i))?;
                        Ok(net.decide(store, &rows, Sampling::Greedy, &mut unused)?.action)
                    })
                    .collect()
            }
        }
    }
}

/// Reward of one macro-step: the mean of its per-step team rewards.
///
/// Keeps the scale independent of `k`; an empty window scores zero.
pub fn macro_reward(team_rewards: &[f64]) -> f64 {
    if team_rewards.is_empty() {
        0.0
    } else {
        team_rewards.iter().sum::<f64>() / team_rewards.len() as f64
    }
}

/// Stage two: the coordinator learns goal assignment over macro-steps while
/// `executor` carries out each goal for `k` primitive steps. An update happens
/// once the segment spans `update_every` primitive steps, rounded up to whole
/// macro-steps, or at episode end.
pub fn train_coordinator(
    env: &EnvConfig,
    config: &TrainConfig,
    executor: &FrozenExecutor,
) -> Result<TrainResult> {
    env.validate()?;
    config.validate()?;
    if let FrozenExecutor::Learned(_, store) = executor {
        if store.is_empty() {
            return Err(Error::invalid("frozen executor has no parameters"));
        }
    }
    let (net, store) = CoordinatorNet::init(config.hidden, config.seed)?;
    workers::run(config, store, |hub, e, local| {
        play(hub, e, local, &net, executor, env, config)
    })
}

fn play(
    hub: &Hub,
    episode: u64,
    local: &mut ParamStore,
    net: &CoordinatorNet,
    executor: &FrozenExecutor,
    env: &EnvConfig,
    config: &TrainConfig,
) -> Result<ProgressRow> {
    let (mut state, mut obs) =
        WorldState::reset_with_seed(env, derive_seed(config.seed, ENV_STREAM, episode))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, POLICY_STREAM, episode));
    let k = env.macro_interval.max(1);
    let per_update = config.update_every.div_ceil(k);
    let mut segment: Vec<CoordinatorTransition> = Vec::new();
    let mut losses = EpisodeLosses::default();
    let (mut macro_sum, mut macro_count) = (0.0, 0usize);
    let (mut team_sum, mut steps) = (0.0, 0usize);

    while !state.is_done(env) {
        let decision = net.decide(local, &obs, Sampling::Stochastic, &mut rng)?;
        let seen = obs.clone();
        let mut window = Vec::with_capacity(k);
        let mut done = false;
        for _ in 0..k {
            let actions = executor.actions(&state, &decision.goal, env)?;
            let result = state.step(env, &actions)?;
            window.push(result.team_reward);
            obs = result.observation;
            done = result.done;
            if done {
                break;
            }
        }
        let reward = macro_reward(&window);
        macro_sum += reward;
        macro_count += 1;
        team_sum += window.iter().sum::<f64>();
        steps += window.len();
        segment.push(CoordinatorTransition {
            observation: seen,
            action: decision.goal,
            log_prob: decision.log_prob,
            reward,
            value: decision.value,
            done,
        });

        if segment.len() == per_update || done {
            let bootstrap = if done {
                0.0
            } else {
                let h = net.encode(local, &obs)?;
                net.amc_value(local, &h)?.0
            };
            let (returns, _) = compute_returns(&segment, bootstrap, config.gamma);
            let report = hub.apply(
                local,
                Segment::Coordinator {
                    net,
                    transitions: &segment,
                    returns: &returns,
                },
            )?;
            losses.add(&report);
            segment.clear();
        }
    }
    Ok(losses.row(
        episode,
        macro_sum / macro_count.max(1) as f64,
        team_sum / steps.max(1) as f64,
    ))
}
