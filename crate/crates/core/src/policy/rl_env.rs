use crate::domain::StateEncoder;
use crate::envs::{DialogueEnv, StepResult};

use super::PolicyError;

/// The learner's view of an environment: encoded states, action counts and legality.
pub trait RlEnv {
    fn n_actions(&self) -> usize;
    fn n_opposite(&self) -> usize;
    /// Opposite-catalog index of the neutral placeholder act.
    fn placeholder(&self) -> usize;
    fn state_dim(&self) -> usize;
    /// Start an episode and return the first observation.
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, PolicyError>;
    /// Legal target actions, or `None` when every action is allowed.
    fn mask(&self) -> Option<Vec<bool>>;
    fn step(&mut self, action: usize) -> Result<(Vec<f64>, StepResult), PolicyError>;
}

/// Adapter from a dialogue environment to encoded vectors.
pub struct EncodedEnv<E: DialogueEnv> {
    pub env: E,
    pub encoder: StateEncoder,
}

impl<E: DialogueEnv> EncodedEnv<E> {
    pub fn new(env: E) -> Result<Self, PolicyError> {
        let encoder = StateEncoder::new(env.config())?;
        Ok(Self { env, encoder })
    }

    pub fn observe(&self) -> Result<Vec<f64>, PolicyError> {
        Ok(self.encoder.encode(&self.env.state())?)
    }
}

impl<E: DialogueEnv> RlEnv for EncodedEnv<E> {
    fn n_actions(&self) -> usize {
        self.env.target_catalog().len()
    }

    fn n_opposite(&self) -> usize {
        self.env.opposite_catalog().len()
    }

    fn placeholder(&self) -> usize {
        self.env.opposite_catalog().placeholder()
    }

    fn state_dim(&self) -> usize {
        self.encoder.state_dim()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, PolicyError> {
        self.env.reset(seed)?;
        self.observe()
    }

    fn mask(&self) -> Option<Vec<bool>> {
        let m = self.env.legal_mask();
        if m.iter().all(|ok| *ok) {
            None
        } else {
            Some(m)
        }
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, StepResult), PolicyError> {
        let r = self.env.step(action)?;
        Ok((self.observe()?, r))
    }
}

/// Deterministic chain: `right` walks toward the goal at the far end
/// (reward 1, terminal), `left` returns to the start with a small reward.
#[derive(Clone, Debug)]
pub struct ChainMdp {
    pub n_states: usize,
    pub left_reward: f64,
    pub goal_reward: f64,
    pub max_steps: usize,
    pos: usize,
    steps: usize,
}

pub const CHAIN_LEFT: usize = 0;
pub const CHAIN_RIGHT: usize = 1;

impl ChainMdp {
    pub fn new(n_states: usize) -> Self {
        Self {
            n_states,
            left_reward: 0.05,
            goal_reward: 1.0,
            max_steps: 4 * n_states,
            pos: 0,
            steps: 0,
        }
    }

    fn encode(&self, s: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_states];
        v[s] = 1.0;
        v
    }

    /// Observation for state `s`.
    pub fn observation(&self, s: usize) -> Vec<f64> {
        self.encode(s)
    }

    /// `(next state, reward, terminal)` of the transition model.
    pub fn transition(&self, s: usize, action: usize) -> (usize, f64, bool) {
        if action == CHAIN_LEFT {
            (0, self.left_reward, false)
        } else if s + 1 == self.n_states - 1 {
            (s + 1, self.goal_reward, true)
        } else {
            (s + 1, 0.0, false)
        }
    }

    /// Optimal values and greedy actions of the non-terminal states.
    pub fn value_iteration(&self, gamma: f64) -> (Vec<f64>, Vec<usize>) {
        let n = self.n_states;
        let mut v = vec![0.0; n];
        for _ in 0..10_000 {
            let mut delta: f64 = 0.0;
            for s in 0..n - 1 {
                let best = (0..2)
                    .map(|a| {
                        let (s2, r, term) = self.transition(s, a);
                        r + if term { 0.0 } else { gamma * v[s2] }
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                delta = delta.max((best - v[s]).abs());
                v[s] = best;
            }
            if delta < 1e-12 {
                break;
            }
        }
        let policy = (0..n - 1)
            .map(|s| {
                let q: Vec<f64> = (0..2)
                    .map(|a| {
                        let (s2, r, term) = self.transition(s, a);
                        r + if term { 0.0 } else { gamma * v[s2] }
                    })
                    .collect();
                crate::nn::argmax(&q)
            })
            .collect();
        (v, policy)
    }
}

impl RlEnv for ChainMdp {
    fn n_actions(&self) -> usize {
        2
    }

    fn n_opposite(&self) -> usize {
        1
    }

    fn placeholder(&self) -> usize {
        0
    }

    fn state_dim(&self) -> usize {
        self.n_states
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>, PolicyError> {
        self.pos = 0;
        self.steps = 0;
        Ok(self.encode(0))
    }

    fn mask(&self) -> Option<Vec<bool>> {
        None
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, StepResult), PolicyError> {
        let (s2, reward, terminal) = self.transition(self.pos, action);
        self.pos = s2;
        self.steps += 1;
        Ok((
            self.encode(s2),
            StepResult {
                opposite: Some(0),
                reward,
                done: terminal || self.steps >= self.max_steps,
            },
        ))
    }
}
