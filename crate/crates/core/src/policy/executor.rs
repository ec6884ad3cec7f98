//! Executor: shared per-sensor policy over the goal-filtered observation rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Sampling;
use crate::env::{Action, OBS_FEATURES};
use crate::error::{Error, Result};
use crate::nn::{AttentionBlock, BoundAttention, BoundLinear, Graph, Linear, Matrix, ParamStore, Var};

pub const EXECUTOR_PREFIX: &str = "executor.";

#[derive(Debug, Clone, Copy)]
pub struct ExecutorNet {
    encoder: AttentionBlock,
    actor: Linear,
    critic: Linear,
    hidden: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutorDecision {
    pub action: Action,
    /// `ln pi(action)`; zero when the goal is empty.
    pub log_prob: f64,
    /// Action probabilities in [`Action::ALL`] order.
    pub probs: [f64; 3],
    pub value: f64,
}

impl ExecutorDecision {
    /// The fixed decision for a sensor without assigned targets.
    pub fn idle() -> Self {
        Self {
            action: Action::Stay,
            log_prob: 0.0,
            probs: [0.0, 1.0, 0.0],
            value: 0.0,
        }
    }
}

impl ExecutorNet {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, hidden: usize, rng: &mut R) -> Result<Self> {
        let p = EXECUTOR_PREFIX;
        Ok(Self {
            encoder: AttentionBlock::new(store, &format!("{p}encoder"), OBS_FEATURES, hidden, rng)?,
            actor: Linear::new(store, &format!("{p}actor"), hidden, 3, rng)?,
            critic: Linear::new(store, &format!("{p}critic"), hidden, 1, rng)?,
            hidden,
        })
    }

    pub fn init(hidden: usize, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Self::new(&mut store, hidden, &mut rng)?;
        Ok((net, store))
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let p = EXECUTOR_PREFIX;
        let encoder = AttentionBlock::lookup(store, &format!("{p}encoder"))?;
        let hidden = encoder.d_att;
        let net = Self {
            encoder,
            actor: Linear::lookup(store, &format!("{p}actor"))?,
            critic: Linear::lookup(store, &format!("{p}critic"))?,
            hidden,
        };
        if encoder.d_in != OBS_FEATURES
            || net.actor.d_in != hidden
            || net.actor.d_out != 3
            || net.critic.d_in != hidden
            || net.critic.d_out != 1
        {
            return Err(Error::shape("executor parameters have inconsistent widths"));
        }
        Ok(net)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> BoundExecutor {
        BoundExecutor {
            encoder: self.encoder.bind(g, store),
            actor: self.actor.bind(g, store),
            critic: self.critic.bind(g, store),
        }
    }

    /// Acts on the goal-filtered rows of one sensor.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        rows: &Matrix,
        sampling: Sampling,
        rng: &mut R,
    ) -> Result<ExecutorDecision> {
        if rows.rows() == 0 {
            return Ok(ExecutorDecision::idle());
        }
        let mut g = Graph::new();
        let net = self.bind(&mut g, store);
        let x = g.constant(rows.clone());
        let (log_probs, value) = net.heads(&mut g, x)?;
        let lp = g.value(log_probs).data();
        let probs = [lp[0].exp(), lp[1].exp(), lp[2].exp()];
        let idx = match sampling {
            Sampling::Greedy => (0..3).fold(0, |best, k| if lp[k] > lp[best] { k } else { best }),
            Sampling::Stochastic => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = 2;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                pick
            }
        };
        Ok(ExecutorDecision {
            action: Action::from_index(idx)?,
            log_prob: lp[idx],
            probs,
            value: g.value(value).item(),
        })
    }
}

/// Executor parameters bound into one [`Graph`].
#[derive(Debug, Clone, Copy)]
pub struct BoundExecutor {
    encoder: BoundAttention,
    actor: BoundLinear,
    critic: BoundLinear,
}

impl BoundExecutor {
    /// Log action probabilities (`1 x 3`) and value (`1 x 1`) for a non-empty `k x 4` input.
    pub fn heads(&self, g: &mut Graph, x: Var) -> Result<(Var, Var)> {
        if g.shape(x).0 == 0 {
            return Err(Error::invalid("executor heads need at least one assigned target"));
        }
        let h = self.encoder.forward(g, x)?;
        let c = g.sum_rows(h);
        let logits = self.actor.forward(g, c)?;
        let log_probs = g.log_softmax_rows(logits);
        let value = self.critic.forward(g, c)?;
        Ok((log_probs, value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(seed: u64, k: usize) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(k, 4, (0..4 * k).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn empty_goal_stays() {
        let (net, store) = ExecutorNet::init(16, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = net
            .decide(&store, &Matrix::zeros(0, 4), Sampling::Stochastic, &mut rng)
            .unwrap();
        assert_eq!(d, ExecutorDecision::idle());
    }

    #[test]
    fn probabilities_normalized() {
        let (net, store) = ExecutorNet::init(super::super::DEFAULT_HIDDEN, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..5 {
            let d = net.decide(&store, &rows(k as u64, k), Sampling::Stochastic, &mut rng).unwrap();
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((d.probs[d.action.index()].ln() - d.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let (net, store) = ExecutorNet::init(32, 2).unwrap();
        let x = rows(3, 4);
        let perm = x.select_rows(&[2, 0, 3, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = net.decide(&store, &x, Sampling::Greedy, &mut rng).unwrap();
        let b = net.decide(&store, &perm, Sampling::Greedy, &mut rng).unwrap();
        for k in 0..3 {
            assert!((a.probs[k] - b.probs[k]).abs() < 1e-9);
        }
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn seeded_sampling_reproduces() {
        let (net, store) = ExecutorNet::init(16, 3).unwrap();
        let x = rows(4, 2);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| net.decide(&store, &x, Sampling::Stochastic, &mut rng).unwrap().action)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn layout_recovered() {
        let (_, store) = ExecutorNet::init(8, 4).unwrap();
        assert_eq!(ExecutorNet::from_store(&store).unwrap().hidden(), 8);
    }
}
