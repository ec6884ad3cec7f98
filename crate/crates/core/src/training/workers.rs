//! Asynchronous rollout workers around one shared parameter store.
//!
//! Each worker claims an episode index, plays it on a private copy of the
//! parameters, and pushes gradients through [`Hub::apply`], which steps the
//! shared optimizer under a lock and refreshes the worker's copy. Episode
//! randomness is derived from the episode index, so a single worker is fully
//! deterministic.

use std::sync::Mutex;

use super::{accumulate_gradients, LossReport, ProgressRow, Segment, TrainConfig, TrainResult};
use crate::error::{Error, Result};
use crate::nn::{Optimizer, ParamStore};

struct Shared {
    store: ParamStore,
    optimizer: Optimizer,
    next_episode: u64,
    updates: u64,
    progress: Vec<ProgressRow>,
    diverged: Option<String>,
}

pub(crate) struct Hub {
    shared: Mutex<Shared>,
    episodes: u64,
    entropy_weight: f64,
}

/// Loss statistics gathered while playing one episode.
#[derive(Debug, Default)]
pub(crate) struct EpisodeLosses {
    policy: f64,
    value: f64,
    entropy: f64,
    updates: u64,
}

impl EpisodeLosses {
    pub(crate) fn add(&mut self, r: &LossReport) {
        self.policy += r.policy_loss;
        self.value += r.value_loss;
        self.entropy += r.entropy;
        self.updates += 1;
    }

    pub(crate) fn row(&self, episode: u64, mean_reward: f64, team_reward: f64) -> ProgressRow {
        let per = |x: f64| if self.updates == 0 { 0.0 } else { x / self.updates as f64 };
        ProgressRow {
            episode,
            mean_reward,
            team_reward,
            policy_loss: per(self.policy),
            value_loss: per(self.value),
            entropy: per(self.entropy),
            updates: self.updates,
        }
    }
}

impl Hub {
    fn lock(&self) -> std::sync::MutexGuard<'_, Shared> {
        // A panicking worker already failed the run; the data is still usable.
        self.shared.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Next episode index and a fresh copy of the shared parameters.
    fn claim(&self, local: &mut ParamStore) -> Result<Option<u64>> {
        let mut s = self.lock();
        if s.diverged.is_some() || s.next_episode >= self.episodes {
            return Ok(None);
        }
        let e = s.next_episode;
        s.next_episode += 1;
        local.copy_values_from(&s.store)?;
        Ok(Some(e))
    }

    /// Computes the segment gradient on `local`, applies it to the shared
    /// store and copies the result back into `local`.
    pub(crate) fn apply(&self, local: &mut ParamStore, segment: Segment<'_>) -> Result<LossReport> {
        local.zero_grad();
        let mut report = accumulate_gradients(local, segment, self.entropy_weight)?;
        let mut s = self.lock();
        if let Some(reason) = &s.diverged {
            return Err(Error::Divergence(reason.clone()));
        }
        let backup = s.store.clone();
        let Shared {
            store, optimizer, ..
        } = &mut *s;
        store.zero_grad();
        store.accumulate_grads_from(local)?;
        report.grad_norm = optimizer.step(store)?;
        if store.iter().any(|(_, p)| !p.value.all_finite()) {
            s.store = backup;
            return Err(Error::Divergence("parameters became non-finite".into()));
        }
        s.updates += 1;
        local.copy_values_from(&s.store)?;
        local.zero_grad();
        Ok(report)
    }

    fn finish(&self, row: ProgressRow) {
        log::debug!(
            "episode {} reward {:.4} updates {}",
            row.episode,
            row.mean_reward,
            row.updates
        );
        self.lock().progress.push(row);
    }

    fn fail(&self, reason: String) {
        let mut s = self.lock();
        if s.diverged.is_none() {
            log::warn!("training stopped: {reason}");
            s.diverged = Some(reason);
        }
    }
}

/// Runs `play(hub, episode, local_store)` for every episode index across
/// `config.workers` threads.
pub(crate) fn run<F>(config: &TrainConfig, store: ParamStore, play: F) -> Result<TrainResult>
where
    F: Fn(&Hub, u64, &mut ParamStore) -> Result<ProgressRow> + Sync,
{
    let hub = Hub {
        shared: Mutex::new(Shared {
            optimizer: Optimizer::new(config.optimizer, config.lr, config.clip_norm),
            store: store.clone(),
            next_episode: 0,
            updates: 0,
            progress: Vec::new(),
            diverged: None,
        }),
        episodes: config.episodes,
        entropy_weight: config.entropy_weight,
    };
    let worker = || -> Result<()> {
        let mut local = store.clone();
        while let Some(e) = hub.claim(&mut local)? {
            match play(&hub, e, &mut local) {
                Ok(row) => hub.finish(row),
                Err(Error::Divergence(reason)) => {
                    hub.fail(format!("episode {e}: {reason}"));
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        Ok(())
    };
    let outcomes: Vec<Result<()>> = if config.workers <= 1 {
        vec![worker()]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..config.workers).map(|_| scope.spawn(worker)).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::State("worker panicked".into()))))
                .collect()
        })
    };
    for o in outcomes {
        o?;
    }
    let s = hub.shared.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut progress = s.progress;
    progress.sort_by_key(|r| r.episode);
    Ok(TrainResult {
        checkpoint: s.store.to_checkpoint(),
        progress,
        updates: s.updates,
        diverged: s.diverged,
    })
}
