//! Two-stage advantage actor-critic training.
//!
//! Stage one trains the shared executor against distance-generated goals.
//! Stage two trains the coordinator over macro-steps of `k` primitive steps
//! while the executors stay fixed (scripted, or a frozen learned network).
//! Both stages run asynchronous workers that share one parameter store.

mod check;
mod coordinator_stage;
mod executor_stage;
mod workers;

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::env::{Action, GoalMap, Observation};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Graph, Matrix, OptimizerKind, ParamStore, Var};
use crate::policy::{CoordinatorNet, ExecutorNet, DEFAULT_HIDDEN};

pub use coordinator_stage::{macro_reward, train_coordinator, FrozenExecutor};
pub use executor_stage::train_executor;
pub use check::loss_grad_check;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Executor,
    Coordinator,
}

/// Where stage two gets its executors from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorSource {
    Scripted,
    Checkpoint(PathBuf),
}

/// Optimization settings. The macro-step length `k` lives in
/// [`EnvConfig::macro_interval`](crate::env::EnvConfig).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stage: Stage,
    pub gamma: f64,
    pub entropy_weight: f64,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub workers: usize,
    /// Primitive steps per update; stage two rounds up to whole macro-steps.
    pub update_every: usize,
    pub episodes: u64,
    pub seed: u64,
    pub hidden: usize,
    pub executor: ExecutorSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage: Stage::Executor,
            gamma: 0.9,
            entropy_weight: 0.01,
            lr: 5e-4,
            optimizer: OptimizerKind::Adam,
            clip_norm: 10.0,
            workers: 6,
            update_every: 20,
            episodes: 50_000,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            executor: ExecutorSource::Scripted,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0, 1)", self.gamma));
        }
        if self.update_every == 0 {
            return bad("update_every must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {}", self.lr));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm {}", self.clip_norm));
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return bad(format!("entropy_weight {}", self.entropy_weight));
        }
        Ok(())
    }
}

/// One decision with what the rollout saw when making it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<O, A> {
    pub observation: O,
    pub action: A,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Executor decisions keep the goal-filtered rows (possibly zero of them).
pub type ExecutorTransition = Transition<Matrix, Action>;
pub type CoordinatorTransition = Transition<Observation, GoalMap>;

/// n-step returns `R_t = r_t + gamma R_{t+1}` and advantages `R_t - v_t`.
///
/// `bootstrap` seeds the recursion after the last transition; a `done`
/// transition cuts it to zero.
pub fn compute_returns<O, A>(
    segment: &[Transition<O, A>],
    bootstrap: f64,
    gamma: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut returns = vec![0.0; segment.len()];
    let mut next = bootstrap;
    for (t, tr) in segment.iter().enumerate().rev() {
        if tr.done {
            next = 0.0;
        }
        next = tr.reward + gamma * next;
        returns[t] = next;
    }
    let adv = returns.iter().zip(segment).map(|(r, tr)| r - tr.value).collect();
    (returns, adv)
}

/// A rollout segment ready for an update; `returns` aligns with `transitions`.
#[derive(Debug, Clone, Copy)]
pub enum Segment<'a> {
    Executor {
        net: &'a ExecutorNet,
        transitions: &'a [ExecutorTransition],
        returns: &'a [f64],
    },
    Coordinator {
        net: &'a CoordinatorNet,
        transitions: &'a [CoordinatorTransition],
        returns: &'a [f64],
    },
}

/// Scalar parts of an update, summed over the segment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Summed policy entropy.
    pub entropy: f64,
    pub total: f64,
    /// Decisions that contributed (executor steps without a goal do not).
    pub samples: usize,
    /// Gradient norm before clipping; zero until an optimizer step ran.
    pub grad_norm: f64,
}

/// Graph nodes of the loss pieces.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub policy: Var,
    pub value: Var,
    pub entropy: Var,
    pub samples: usize,
}

/// `-sum log pi * A + 1/2 sum (R - v)^2 - entropy_weight * sum H`,
/// with `A = R - v_rollout` held constant.
pub fn segment_loss(
    g: &mut Graph,
    store: &ParamStore,
    segment: Segment<'_>,
    entropy_weight: f64,
) -> Result<LossVars> {
    let zero = g.constant(Matrix::scalar(0.0));
    let (mut policy, mut value, mut entropy) = (zero, zero, zero);
    let mut samples = 0;
    match segment {
        Segment::Executor {
            net,
            transitions,
            returns,
        } => {
            check_len(transitions.len(), returns.len())?;
            let bound = net.bind(g, store);
            for (tr, &ret) in transitions.iter().zip(returns) {
                if tr.observation.rows() == 0 {
                    continue;
                }
                samples += 1;
                let x = g.constant(tr.observation.clone());
                let (log_probs, v) = bound.heads(g, x)?;
                let mut onehot = Matrix::zeros(1, 3);
                onehot.set(0, tr.action.index(), 1.0);
                let mask = g.constant(onehot);
                let picked = g.mul(log_probs, mask)?;
                let lp = g.sum(picked);
                let probs = g.softmax_rows(log_probs);
                let plogp = g.mul(probs, log_probs)?;
                let neg_h = g.sum(plogp);
                policy = accumulate_policy(g, policy, lp, ret - tr.value)?;
                value = accumulate_value(g, value, v, ret)?;
                entropy = g.sub(entropy, neg_h)?;
            }
        }
        Segment::Coordinator {
            net,
            transitions,
            returns,
        } => {
            check_len(transitions.len(), returns.len())?;
            let bound = net.bind(g, store);
            for (tr, &ret) in transitions.iter().zip(returns) {
                if tr.observation.entries().len() != tr.action.bits().len() {
                    return Err(Error::shape("goal map does not match observation"));
                }
                samples += 1;
                let h = bound.encode(g, &tr.observation)?;
                let z = bound.assignment_logits(g, h)?;
                let (v, _) = bound.amc_value(g, h)?;
                let signs: Vec<f64> =
                    tr.action.bits().iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
                let signs = g.constant(Matrix::from_vec(signs.len(), 1, signs)?);
                let signed = g.mul(z, signs)?;
                let ls = g.log_sigmoid(signed);
                let lp = g.sum(ls);
                // Bernoulli entropy per pair: -(p ln p + q ln q).
                let neg_z = g.scale(z, -1.0);
                let p = g.sigmoid(z);
                let q = g.sigmoid(neg_z);
                let lsp = g.log_sigmoid(z);
                let lsq = g.log_sigmoid(neg_z);
                let a = g.mul(p, lsp)?;
                let b = g.mul(q, lsq)?;
                let ab = g.add(a, b)?;
                let neg_h = g.sum(ab);
                policy = accumulate_policy(g, policy, lp, ret - tr.value)?;
                value = accumulate_value(g, value, v, ret)?;
                entropy = g.sub(entropy, neg_h)?;
            }
        }
    }
    let weighted = g.scale(entropy, entropy_weight);
    let pv = g.add(policy, value)?;
    let total = g.sub(pv, weighted)?;
    Ok(LossVars {
        total,
        policy,
        value,
        entropy,
        samples,
    })
}

fn check_len(transitions: usize, returns: usize) -> Result<()> {
    if transitions != returns {
        return Err(Error::shape(format!("{transitions} transitions but {returns} returns")));
    }
    Ok(())
}

fn accumulate_policy(g: &mut Graph, acc: Var, log_prob: Var, advantage: f64) -> Result<Var> {
    let term = g.scale(log_prob, -advantage);
    g.add(acc, term)
}

fn accumulate_value(g: &mut Graph, acc: Var, v: Var, ret: f64) -> Result<Var> {
    let target = g.constant(Matrix::scalar(ret));
    let diff = g.sub(v, target)?;
    let sq = g.mul(diff, diff)?;
    let half = g.scale(sq, 0.5);
    g.add(acc, half)
}

/// Adds the segment's loss gradient into the grad slots of `store`.
pub fn accumulate_gradients(
    store: &mut ParamStore,
    segment: Segment<'_>,
    entropy_weight: f64,
) -> Result<LossReport> {
    let mut g = Graph::new();
    let vars = segment_loss(&mut g, store, segment, entropy_weight)?;
    let report = LossReport {
        policy_loss: g.value(vars.policy).item(),
        value_loss: g.value(vars.value).item(),
        entropy: g.value(vars.entropy).item(),
        total: g.value(vars.total).item(),
        samples: vars.samples,
        grad_norm: 0.0,
    };
    if !report.total.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite loss (policy {}, value {}, entropy {})",
            report.policy_loss, report.value_loss, report.entropy
        )));
    }
    if vars.samples > 0 {
        g.backward(vars.total, store)?;
    }
    Ok(report)
}

/// One synchronous update: gradients of the segment loss, clipped and applied.
pub fn a2c_update(
    store: &mut ParamStore,
    optimizer: &mut crate::nn::Optimizer,
    segment: Segment<'_>,
    entropy_weight: f64,
) -> Result<LossReport> {
    store.zero_grad();
    let mut report = accumulate_gradients(store, segment, entropy_weight)?;
    report.grad_norm = optimizer.step(store)?;
    Ok(report)
}

/// Per-episode training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub episode: u64,
    /// Stage one: mean executor reward over steps with a goal.
    /// Stage two: mean macro-reward.
    pub mean_reward: f64,
    pub team_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub updates: u64,
}

pub const PROGRESS_HEADER: &str =
    "episode,mean_reward,team_reward,policy_loss,value_loss,entropy,updates";

/// Writes the progress table; a `manifest` hash becomes a trailing column.
pub fn write_progress_csv<W: Write>(
    mut out: W,
    rows: &[ProgressRow],
    manifest: Option<&str>,
) -> Result<()> {
    match manifest {
        Some(_) => writeln!(out, "{PROGRESS_HEADER},manifest")?,
        None => writeln!(out, "{PROGRESS_HEADER}")?,
    }
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            r.episode, r.mean_reward, r.team_reward, r.policy_loss, r.value_loss, r.entropy, r.updates
        )?;
        match manifest {
            Some(h) => writeln!(out, ",{h}")?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    /// Final parameters, or the last finite ones if training diverged.
    pub checkpoint: Checkpoint,
    /// Sorted by episode.
    pub progress: Vec<ProgressRow>,
    pub updates: u64,
    pub diverged: Option<String>,
}

impl TrainResult {
    /// Mean of `mean_reward` over the first and last `fraction` of episodes.
    pub fn reward_trend(&self, fraction: f64) -> Option<(f64, f64)> {
        let n = self.progress.len();
        let k = ((n as f64 * fraction).round() as usize).max(1);
        if n < 2 * k {
            return None;
        }
        let mean = |rows: &[ProgressRow]| rows.iter().map(|r| r.mean_reward).sum::<f64>() / rows.len() as f64;
        Some((mean(&self.progress[..k]), mean(&self.progress[n - k..])))
    }
}

/// Independent stream seeds from one base seed.
pub(crate) fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
