use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::workers::{self, EpisodeLosses, Hub};
use super::{compute_returns, derive_seed, ExecutorTransition, Segment, TrainConfig, TrainResult};
use crate::baselines::distance_goal_generation;
use crate::env::{executor_reward_with_cost, EnvConfig, GoalMap, Observation, WorldState};
use crate::error::Result;
use crate::nn::{Matrix, ParamStore};
use crate::policy::{goal_filter, ExecutorNet, Sampling};

pub(crate) const ENV_STREAM: u64 = 1;
pub(crate) const POLICY_STREAM: u64 = 2;

/// Stage one: the shared executor learns to follow distance-generated goals.
///
/// Goals are regenerated every `k` steps. Each sensor keeps its own chain of
/// transitions; every `update_every` steps (and at episode end) all chains are
/// folded into one update.
pub fn train_executor(env: &EnvConfig, config: &TrainConfig) -> Result<TrainResult> {
    env.validate()?;
    config.validate()?;
    let (net, store) = ExecutorNet::init(config.hidden, config.seed)?;
    workers::run(config, store, |hub, e, local| play(hub, e, local, &net, env, config))
}

fn filtered(obs: &Observation, goals: &GoalMap, i: usize) -> Result<Matrix> {
    goal_filter(obs.sensor_rows(i), goals.row(i))
}

fn play(
    hub: &Hub,
    episode: u64,
    local: &mut ParamStore,
    net: &ExecutorNet,
    env: &EnvConfig,
    config: &TrainConfig,
) -> Result<super::ProgressRow> {
    let (mut state, mut obs) =
        WorldState::reset_with_seed(env, derive_seed(config.seed, ENV_STREAM, episode))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, POLICY_STREAM, episode));
    let n = env.n_sensors;
    let k = env.macro_interval.max(1);
    let mut goals = distance_goal_generation(&state, env);
    let mut chains: Vec<Vec<ExecutorTransition>> = vec![Vec::new(); n];
    let mut losses = EpisodeLosses::default();
    let (mut reward_sum, mut reward_count) = (0.0, 0usize);
    let mut team_sum = 0.0;
    let mut steps = 0usize;
    let mut since_update = 0usize;

    while !state.is_done(env) {
        if steps.is_multiple_of(k) {
            goals = distance_goal_generation(&state, env);
        }
        let mut actions = Vec::with_capacity(n);
        let mut pending = Vec::with_capacity(n);
        for i in 0..n {
            let rows = filtered(&obs, &goals, i)?;
            let d = net.decide(local, &rows, Sampling::Stochastic, &mut rng)?;
            actions.push(d.action);
            pending.push((rows, d));
        }
        let result = state.step(env, &actions)?;
        team_sum += result.team_reward;
        for (i, (rows, d)) in pending.into_iter().enumerate() {
            let assigned = goals.assigned(i);
            let r = executor_reward_with_cost(&state, i, &assigned, result.per_sensor_cost[i], env);
            if !assigned.is_empty() {
                reward_sum += r;
                reward_count += 1;
            }
            chains[i].push(ExecutorTransition {
                observation: rows,
                action: d.action,
                log_prob: d.log_prob,
                reward: r,
                value: d.value,
                done: result.done,
            });
        }
        obs = result.observation;
        steps += 1;
        since_update += 1;

        if since_update == config.update_every || result.done {
            let next_goals = if steps.is_multiple_of(k) {
                distance_goal_generation(&state, env)
            } else {
                goals.clone()
            };
            let mut transitions = Vec::new();
            let mut returns = Vec::new();
            for (i, chain) in chains.iter_mut().enumerate() {
                let bootstrap = if result.done {
                    0.0
                } else {
                    let rows = filtered(&obs, &next_goals, i)?;
                    net.decide(local, &rows, Sampling::Greedy, &mut rng)?.value
                };
                let (r, _) = compute_returns(chain, bootstrap, config.gamma);
                returns.extend(r);
                transitions.append(chain);
            }
            let report = hub.apply(
                local,
                Segment::Executor {
                    net,
                    transitions: &transitions,
                    returns: &returns,
                },
            )?;
            losses.add(&report);
            since_update = 0;
        }
    }
    let mean_reward = if reward_count == 0 {
        0.0
    } else {
        reward_sum / reward_count as f64
    };
    Ok(losses.row(episode, mean_reward, team_sum / steps.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(episodes: u64) -> (EnvConfig, TrainConfig) {
        let env = EnvConfig {
            episode_length: 30,
            ..EnvConfig::default().with_counts(2, 3)
        };
        let cfg = TrainConfig {
            workers: 1,
            episodes,
            hidden: 8,
            seed: 4,
            ..TrainConfig::default()
        };
        (env, cfg)
    }

    #[test]
    fn zero_episodes_returns_initialization() {
        let (env, cfg) = tiny(0);
        let res = train_executor(&env, &cfg).unwrap();
        let (_, init) = ExecutorNet::init(8, 4).unwrap();
        assert_eq!(res.checkpoint, init.to_checkpoint());
        assert!(res.progress.is_empty());
        assert_eq!(res.updates, 0);
    }

    #[test]
    fn single_worker_is_reproducible() {
        let (env, cfg) = tiny(3);
        let a = train_executor(&env, &cfg).unwrap();
        let b = train_executor(&env, &cfg).unwrap();
        assert_eq!(a.progress, b.progress);
        assert_eq!(a.checkpoint, b.checkpoint);
        // 30 steps, update every 20 → two updates per episode.
        assert_eq!(a.updates, 6);
    }

    #[test]
    fn parallel_workers_cover_every_episode() {
        let (env, mut cfg) = tiny(6);
        cfg.workers = 3;
        let res = train_executor(&env, &cfg).unwrap();
        let eps: Vec<u64> = res.progress.iter().map(|r| r.episode).collect();
        assert_eq!(eps, (0..6).collect::<Vec<_>>());
        assert!(res.diverged.is_none());
    }
}
