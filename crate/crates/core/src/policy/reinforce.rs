use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{masked_argmax, Activation, Mlp, ParamStore, Tape, Var};

use super::agent::{apply, EnvDims};
use super::networks::masked_softmax;
use super::networks::masked_softmax_node;
use super::ops::sample_from;
use super::rl_env::RlEnv;
use super::PolicyError;

/// Two-layer softmax policy.
#[derive(Clone, Debug)]
pub struct PolicyNet {
    pub mlp: Mlp,
    pub store: ParamStore,
}

impl PolicyNet {
    pub fn new<R: Rng>(
        state_dim: usize,
        hidden: usize,
        n_actions: usize,
        act: Activation,
        rng: &mut R,
    ) -> Result<Self, PolicyError> {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "pi", state_dim, hidden, n_actions, act, rng)?;
        Ok(Self { mlp, store })
    }

    pub fn from_store(store: ParamStore, act: Activation) -> Result<Self, PolicyError> {
        Ok(Self {
            mlp: Mlp::bind(&store, "pi", act)?,
            store,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.mlp.out_dim()
    }

    pub fn distribution(&self, state: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>, PolicyError> {
        let mut tape = Tape::new(&self.store);
        let s = tape.input_vec(state.to_vec());
        let logits = self.mlp.forward(&mut tape, s)?;
        Ok(masked_softmax(tape.value(logits), 1.0, mask)?)
    }

    pub fn greedy_action(&self, state: &[f64], mask: Option<&[bool]>) -> Result<usize, PolicyError> {
        let mut tape = Tape::new(&self.store);
        let s = tape.input_vec(state.to_vec());
        let logits = self.mlp.forward(&mut tape, s)?;
        Ok(masked_argmax(tape.value(logits), mask))
    }
}

/// A sampled episode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub states: Vec<Vec<f64>>,
    pub masks: Vec<Option<Vec<bool>>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl EpisodeTrace {
    /// Discounted reward-to-go `G_t`.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        let mut g = 0.0;
        let mut out = vec![0.0; self.rewards.len()];
        for t in (0..self.rewards.len()).rev() {
            g = self.rewards[t] + gamma * g;
            out[t] = g;
        }
        out
    }
}

/// `−Σ_t (G_t − b) log π(a_t|s_t)` averaged over episodes, with `b` the
/// mean return over every step of the batch.
pub fn reinforce_loss(
    tape: &mut Tape,
    net: &PolicyNet,
    episodes: &[EpisodeTrace],
    gamma: f64,
) -> Result<Var, PolicyError> {
    if episodes.is_empty() || episodes.iter().any(|e| e.actions.is_empty()) {
        return Err(PolicyError::EmptyEpisode);
    }
    let returns: Vec<Vec<f64>> = episodes.iter().map(|e| e.returns(gamma)).collect();
    let n: usize = returns.iter().map(Vec::len).sum();
    let baseline = returns.iter().flatten().sum::<f64>() / n as f64;
    let mut terms = Vec::with_capacity(n);
    for (e, g) in episodes.iter().zip(&returns) {
        for (t, gt) in g.iter().enumerate().take(e.actions.len()) {
            let s = tape.input_vec(e.states[t].clone());
            let logits = net.mlp.forward(tape, s)?;
            let p = masked_softmax_node(tape, logits, 1.0, e.masks[t].as_deref())?;
            let lp = tape.log(p);
            let la = tape.pick(lp, e.actions[t])?;
            terms.push(tape.scale(la, -(gt - baseline)));
        }
    }
    let c = tape.concat(&terms)?;
    let s = tape.sum(c);
    Ok(tape.scale(s, 1.0 / episodes.len() as f64))
}

/// One policy-gradient step; returns the surrogate loss.
pub fn reinforce_update(
    net: &mut PolicyNet,
    episodes: &[EpisodeTrace],
    gamma: f64,
    lr: f64,
) -> Result<f64, PolicyError> {
    let (loss, grads) = {
        let mut tape = Tape::new(&net.store);
        let l = reinforce_loss(&mut tape, net, episodes, gamma)?;
        (tape.scalar(l), tape.backward(l)?)
    };
    apply(&mut net.store, &grads, lr)?;
    Ok(loss)
}

/// REINFORCE learner that updates after every `batch` sampled episodes.
#[derive(Clone, Debug)]
pub struct ReinforceAgent {
    pub net: PolicyNet,
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pending: Vec<EpisodeTrace>,
}

impl ReinforceAgent {
    pub fn new<R: Rng>(
        dims: EnvDims,
        hidden: usize,
        gamma: f64,
        lr: f64,
        batch: usize,
        act: Activation,
        rng: &mut R,
    ) -> Result<Self, PolicyError> {
        Ok(Self {
            net: PolicyNet::new(dims.state_dim, hidden, dims.n_actions, act, rng)?,
            gamma,
            lr,
            batch: batch.max(1),
            pending: Vec::new(),
        })
    }

    pub fn from_net(net: PolicyNet, gamma: f64, lr: f64, batch: usize) -> Self {
        Self {
            net,
            gamma,
            lr,
            batch: batch.max(1),
            pending: Vec::new(),
        }
    }

    pub fn sample_episode<E: RlEnv, R: Rng>(
        &self,
        env: &mut E,
        seed: u64,
        rng: &mut R,
    ) -> Result<EpisodeTrace, PolicyError> {
        let mut trace = EpisodeTrace::default();
        let mut state = env.reset(seed)?;
        loop {
            let mask = env.mask();
            let dist = self.net.distribution(&state, mask.as_deref())?;
            let a = sample_from(&dist, rng);
            let (next, r) = env.step(a)?;
            trace.states.push(std::mem::replace(&mut state, next));
            trace.masks.push(mask);
            trace.actions.push(a);
            trace.rewards.push(r.reward);
            if r.done {
                return Ok(trace);
            }
        }
    }

    /// Sample one episode and update once a batch is complete.
    pub fn train_episode<E: RlEnv, R: Rng>(
        &mut self,
        env: &mut E,
        seed: u64,
        rng: &mut R,
    ) -> Result<EpisodeTrace, PolicyError> {
        let trace = self.sample_episode(env, seed, rng)?;
        self.pending.push(trace.clone());
        if self.pending.len() >= self.batch {
            let batch = std::mem::take(&mut self.pending);
            reinforce_update(&mut self.net, &batch, self.gamma, self.lr)?;
        }
        Ok(trace)
    }
}
