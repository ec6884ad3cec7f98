//! Coordinator: attention encoder over sensor/target pairs, a per-pair
//! Bernoulli assignment head, and a critic that builds the team value as a sum
//! of approximate marginal contributions.
//!
//! The critic visits pairs in their flattened order `1..l`. Pair `e` is scored
//! by `phi([eta_e, h_e])`, where `eta_e` summarizes the coalition of pairs
//! before it: `eta_1 = 0` and `eta_{e+1}` is the row sum of a second attention
//! module applied to `H[1..=e]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bernoulli, GoalMap, Sampling};
use crate::env::{Observation, OBS_FEATURES};
use crate::error::{Error, Result};
use crate::nn::{
    AttentionBlock, BoundAttention, BoundLinear, Graph, Linear, Matrix, ParamStore, Var,
};

pub const COORDINATOR_PREFIX: &str = "coordinator.";

#[derive(Debug, Clone, Copy)]
pub struct CoordinatorNet {
    embed1: Linear,
    embed2: Linear,
    encoder: AttentionBlock,
    actor: Linear,
    critic_attention: AttentionBlock,
    critic_value: Linear,
    hidden: usize,
}

/// Output of one coordinator decision.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorDecision {
    pub goal: GoalMap,
    /// Log-probability of `goal` under the per-pair Bernoulli policy.
    pub log_prob: f64,
    /// Assignment probabilities `p_ij`, row-major.
    pub probs: Vec<f64>,
    /// Team value estimate from the critic.
    pub value: f64,
}

impl CoordinatorNet {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, hidden: usize, rng: &mut R) -> Result<Self> {
        let p = COORDINATOR_PREFIX;
        Ok(Self {
            embed1: Linear::new(store, &format!("{p}embed1"), OBS_FEATURES, hidden, rng)?,
            embed2: Linear::new(store, &format!("{p}embed2"), hidden, hidden, rng)?,
            encoder: AttentionBlock::new(store, &format!("{p}encoder"), hidden, hidden, rng)?,
            actor: Linear::new(store, &format!("{p}actor"), hidden, 1, rng)?,
            critic_attention: AttentionBlock::new(
                store,
                &format!("{p}critic.attention"),
                hidden,
                hidden,
                rng,
            )?,
            critic_value: Linear::new(store, &format!("{p}critic.value"), 2 * hidden, 1, rng)?,
            hidden,
        })
    }

    /// Fresh network in its own store, initialized from `seed`.
    pub fn init(hidden: usize, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Self::new(&mut store, hidden, &mut rng)?;
        Ok((net, store))
    }

    /// Recovers the layout from a store holding `coordinator.*` parameters.
    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let p = COORDINATOR_PREFIX;
        let embed1 = Linear::lookup(store, &format!("{p}embed1"))?;
        let hidden = embed1.d_out;
        let net = Self {
            embed1,
            embed2: Linear::lookup(store, &format!("{p}embed2"))?,
            encoder: AttentionBlock::lookup(store, &format!("{p}encoder"))?,
            actor: Linear::lookup(store, &format!("{p}actor"))?,
            critic_attention: AttentionBlock::lookup(store, &format!("{p}critic.attention"))?,
            critic_value: Linear::lookup(store, &format!("{p}critic.value"))?,
            hidden,
        };
        if net.embed1.d_in != OBS_FEATURES
            || net.embed2.d_in != hidden
            || net.embed2.d_out != hidden
            || net.encoder.d_in != hidden
            || net.encoder.d_att != hidden
            || net.actor.d_in != hidden
            || net.actor.d_out != 1
            || net.critic_attention.d_in != hidden
            || net.critic_attention.d_att != hidden
            || net.critic_value.d_in != 2 * hidden
            || net.critic_value.d_out != 1
        {
            return Err(Error::shape("coordinator parameters have inconsistent widths"));
        }
        Ok(net)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> BoundCoordinator {
        BoundCoordinator {
            embed1: self.embed1.bind(g, store),
            embed2: self.embed2.bind(g, store),
            encoder: self.encoder.bind(g, store),
            actor: self.actor.bind(g, store),
            critic_attention: self.critic_attention.bind(g, store),
            critic_value: self.critic_value.bind(g, store),
            hidden: self.hidden,
        }
    }

    /// Encodes the joint observation into `H`, one row per pair.
    pub fn encode(&self, store: &ParamStore, obs: &Observation) -> Result<Matrix> {
        let mut g = Graph::new();
        let net = self.bind(&mut g, store);
        let h = net.encode(&mut g, obs)?;
        Ok(g.value(h).clone())
    }

    /// Team value and per-pair contributions for an encoding `H`.
    pub fn amc_value(&self, store: &ParamStore, h: &Matrix) -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::new();
        let net = self.bind(&mut g, store);
        let hv = g.constant(h.clone());
        let (v, parts) = net.amc_value(&mut g, hv)?;
        Ok((
            g.value(v).item(),
            parts.iter().map(|&p| g.value(p).item()).collect(),
        ))
    }

    /// Samples (or thresholds) a goal map from an encoding of an `n x m` observation.
    pub fn act<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        h: &Matrix,
        shape: (usize, usize),
        sampling: Sampling,
        rng: &mut R,
    ) -> Result<(GoalMap, f64, Vec<f64>)> {
        let mut g = Graph::new();
        let net = self.bind(&mut g, store);
        let hv = g.constant(h.clone());
        let logits = net.assignment_logits(&mut g, hv)?;
        let logits = g.value(logits).data().to_vec();
        sample_goal(&logits, shape, sampling, rng)
    }

    /// Full decision: encode, assign, and evaluate the critic.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        store: &ParamStore,
        obs: &Observation,
        sampling: Sampling,
        rng: &mut R,
    ) -> Result<CoordinatorDecision> {
        let (n, m, _) = obs.shape();
        let mut g = Graph::new();
        let net = self.bind(&mut g, store);
        let h = net.encode(&mut g, obs)?;
        let logits = net.assignment_logits(&mut g, h)?;
        let (value, _) = net.amc_value(&mut g, h)?;
        let logits = g.value(logits).data().to_vec();
        let (goal, log_prob, probs) = sample_goal(&logits, (n, m), sampling, rng)?;
        Ok(CoordinatorDecision {
            goal,
            log_prob,
            probs,
            value: g.value(value).item(),
        })
    }
}

fn sample_goal<R: Rng + ?Sized>(
    logits: &[f64],
    (n, m): (usize, usize),
    sampling: Sampling,
    rng: &mut R,
) -> Result<(GoalMap, f64, Vec<f64>)> {
    if logits.len() != n * m {
        return Err(Error::shape(format!("{} logits for {n}x{m} pairs", logits.len())));
    }
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let mut goal = GoalMap::zeros(n, m);
    let mut log_prob = 0.0;
    for (k, (&z, &p)) in logits.iter().zip(&probs).enumerate() {
        let bit = bernoulli(p, sampling, rng);
        goal.set(k / m, k % m, bit);
        log_prob += if bit { log_sigmoid(z) } else { log_sigmoid(-z) };
    }
    Ok((goal, log_prob, probs))
}

/// `sum_ij ln P(g_ij)` for independent Bernoulli entries with probabilities `probs`.
pub fn bernoulli_log_prob(probs: &[f64], goal: &GoalMap) -> f64 {
    probs
        .iter()
        .zip(goal.bits())
        .map(|(&p, &b)| if b { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Coordinator parameters bound into one [`Graph`].
#[derive(Debug, Clone, Copy)]
pub struct BoundCoordinator {
    embed1: BoundLinear,
    embed2: BoundLinear,
    encoder: BoundAttention,
    actor: BoundLinear,
    critic_attention: BoundAttention,
    critic_value: BoundLinear,
    hidden: usize,
}

impl BoundCoordinator {
    /// `H`: `(n*m) x hidden`, pair `(i, j)` at row `i*m + j`.
    pub fn encode(&self, g: &mut Graph, obs: &Observation) -> Result<Var> {
        let (n, m, _) = obs.shape();
        if n * m == 0 {
            return Err(Error::shape("empty observation"));
        }
        let flat = Matrix::from_vec(
            n * m,
            OBS_FEATURES,
            obs.entries().iter().flat_map(|e| e.iter().copied()).collect(),
        )?;
        let x = g.constant(flat);
        self.encode_rows(g, x)
    }

    /// Encodes an explicit `l x 4` pair matrix.
    pub fn encode_rows(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let e1 = self.embed1.forward(g, x)?;
        let e1 = g.tanh(e1);
        let e2 = self.embed2.forward(g, e1)?;
        let e2 = g.tanh(e2);
        self.encoder.forward(g, e2)
    }

    /// Pre-sigmoid assignment scores, `l x 1`.
    pub fn assignment_logits(&self, g: &mut Graph, h: Var) -> Result<Var> {
        self.actor.forward(g, h)
    }

    /// Team value `v_H` and the per-pair contributions that sum to it.
    pub fn amc_value(&self, g: &mut Graph, h: Var) -> Result<(Var, Vec<Var>)> {
        let (l, d) = g.shape(h);
        if l == 0 {
            return Err(Error::invalid("marginal-contribution critic needs at least one pair"));
        }
        if d != self.hidden {
            return Err(Error::shape(format!("encoding width {d}, expected {}", self.hidden)));
        }
        // Attention over a prefix only needs the prefix rows of the full projections.
        let proj = self.critic_attention.project(g, h)?;
        let mut eta = g.constant(Matrix::zeros(1, self.hidden));
        let mut parts = Vec::with_capacity(l);
        for e in 0..l {
            let member = g.slice_rows(h, e, e + 1)?;
            let joined = g.concat_cols(eta, member)?;
            parts.push(self.critic_value.forward(g, joined)?);
            if e + 1 < l {
                let prefix = crate::nn::Projections {
                    q: g.slice_rows(proj.q, 0, e + 1)?,
                    k: g.slice_rows(proj.k, 0, e + 1)?,
                    v: g.slice_rows(proj.v, 0, e + 1)?,
                };
                let coalition = self.critic_attention.attend(g, prefix)?;
                eta = g.sum_rows(coalition);
            }
        }
        let mut total = parts[0];
        for &p in &parts[1..] {
            total = g.add(total, p)?;
        }
        Ok((total, parts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, WorldState};

    fn small() -> (CoordinatorNet, ParamStore) {
        CoordinatorNet::init(16, 5).unwrap()
    }

    fn random_h(l: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(l, d, (0..l * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn encode_shapes() {
        let (net, store) = CoordinatorNet::init(DEFAULT_HIDDEN_TEST, 1).unwrap();
        let cfg = EnvConfig::default().with_counts(1, 1);
        let (_, obs) = WorldState::reset(&cfg).unwrap();
        assert_eq!(net.encode(&store, &obs).unwrap().shape(), (1, DEFAULT_HIDDEN_TEST));
        let cfg = EnvConfig::default().with_counts(4, 5);
        let (_, obs) = WorldState::reset(&cfg).unwrap();
        assert_eq!(net.encode(&store, &obs).unwrap().shape(), (20, DEFAULT_HIDDEN_TEST));
    }

    const DEFAULT_HIDDEN_TEST: usize = super::super::DEFAULT_HIDDEN;

    #[test]
    fn single_pair_value() {
        let (net, store) = small();
        let h = random_h(1, 16, 2);
        let (v, parts) = net.amc_value(&store, &h).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(v, parts[0]);
        // phi([0, h_1])
        let w = store.value(net.critic_value.weight);
        let b = store.value(net.critic_value.bias).item();
        let direct: f64 = h.data().iter().zip(&w.data()[16..]).map(|(x, y)| x * y).sum::<f64>() + b;
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn empty_encoding_rejected() {
        let (net, store) = small();
        assert!(matches!(
            net.amc_value(&store, &Matrix::zeros(0, 16)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (g, lp, probs) =
            sample_goal(&[800.0; 6], (2, 3), Sampling::Stochastic, &mut rng).unwrap();
        assert!(g.bits().iter().all(|&b| b));
        assert_eq!(lp, 0.0);
        assert!(probs.iter().all(|&p| p == 1.0));

        let (g, lp, _) = sample_goal(&[0.0; 20], (4, 5), Sampling::Stochastic, &mut rng).unwrap();
        assert!((lp - 20.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((bernoulli_log_prob(&[0.5; 20], &g) - lp).abs() < 1e-12);
    }

    #[test]
    fn greedy_thresholds_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (g, _, _) = sample_goal(&[0.1, -0.1, 0.0], (1, 3), Sampling::Greedy, &mut rng).unwrap();
        assert_eq!(g.to_rows(), vec![vec![1, 0, 0]]);
    }

    #[test]
    fn seeded_decisions_reproduce() {
        let (net, store) = small();
        let cfg = EnvConfig::default().with_counts(2, 3);
        let (_, obs) = WorldState::reset(&cfg).unwrap();
        let a = net
            .decide(&store, &obs, Sampling::Stochastic, &mut ChaCha8Rng::seed_from_u64(4))
            .unwrap();
        let b = net
            .decide(&store, &obs, Sampling::Stochastic, &mut ChaCha8Rng::seed_from_u64(4))
            .unwrap();
        assert_eq!(a, b);
        assert!(a.probs.iter().all(|&p| p > 0.0 && p < 1.0));
        assert!((bernoulli_log_prob(&a.probs, &a.goal) - a.log_prob).abs() < 1e-12);
    }

    #[test]
    fn layout_recovered_from_checkpoint() {
        let (net, store) = small();
        let ck = store.to_checkpoint();
        let back = ParamStore::from_checkpoint(&ck, COORDINATOR_PREFIX).unwrap();
        let net2 = CoordinatorNet::from_store(&back).unwrap();
        assert_eq!(net2.hidden(), net.hidden());
        let h = random_h(3, 16, 8);
        assert_eq!(net.amc_value(&store, &h).unwrap(), net2.amc_value(&back, &h).unwrap());
    }

    /// Hand-unrolled critic: every coalition is re-encoded from scratch.
    fn naive_amc(net: &CoordinatorNet, store: &ParamStore, h: &Matrix) -> Vec<f64> {
        let d = net.hidden();
        let w = store.value(net.critic_value.weight);
        let b = store.value(net.critic_value.bias).item();
        let phi = |eta: &[f64], row: &[f64]| -> f64 {
            let joined: Vec<f64> = eta.iter().chain(row).copied().collect();
            joined.iter().enumerate().map(|(r, x)| x * w.get(r, 0)).sum::<f64>() + b
        };
        let mut parts = vec![phi(&vec![0.0; d], h.row(0))];
        for e in 1..h.rows() {
            let coalition = h.slice_rows(0, e);
            let att = net.critic_attention.forward(store, &coalition).unwrap();
            let eta = att.sum_rows();
            parts.push(phi(eta.data(), h.row(e)));
        }
        parts
    }

    #[test]
    fn amc_matches_unrolled_oracle() {
        let (net, store) = small();
        for l in 1..6 {
            let h = random_h(l, 16, 20 + l as u64);
            let (v, parts) = net.amc_value(&store, &h).unwrap();
            let oracle = naive_amc(&net, &store, &h);
            for (a, b) in parts.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            assert!((v - parts.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn encoder_is_permutation_equivariant() {
        let (net, store) = small();
        let x = random_h(6, 4, 31);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let encode = |m: &Matrix| {
            let mut g = Graph::new();
            let b = net.bind(&mut g, &store);
            let xv = g.constant(m.clone());
            let h = b.encode_rows(&mut g, xv).unwrap();
            g.value(h).clone()
        };
        let h = encode(&x);
        let hp = encode(&x.select_rows(&perm));
        for (r, &src) in perm.iter().enumerate() {
            for (a, b) in hp.row(r).iter().zip(h.row(src)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn goal_distribution_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (n, m) in [(1, 1), (2, 2), (2, 3), (2, 4)] {
            let l = n * m;
            let logits: Vec<f64> = (0..l).map(|_| rng.random_range(-3.0..3.0)).collect();
            let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
            let total: f64 = (0..1u32 << l)
                .map(|mask| {
                    let g = GoalMap::from_fn(n, m, |i, j| mask >> (i * m + j) & 1 == 1);
                    bernoulli_log_prob(&probs, &g).exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
    }
}
