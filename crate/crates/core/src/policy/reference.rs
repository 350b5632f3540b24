//! A deliberately plain DQN loop over the same network substrate, used to
//! check that the opposite-aware learner reduces to it with both flags off.

use rand::Rng;

use crate::nn::{masked_argmax, Tape};

use super::agent::{apply, EnvDims};
use super::buffer::{ReplayBuffer, Transition};
use super::config::TrainingConfig;
use super::networks::{OppInput, QDims, QFunction};
use super::rl_env::RlEnv;
use super::PolicyError;

pub struct VanillaDqn {
    pub q: QFunction,
    pub config: TrainingConfig,
    placeholder: usize,
    steps: u64,
}

impl VanillaDqn {
    pub fn new<R: Rng>(dims: EnvDims, config: TrainingConfig, rng: &mut R) -> Result<Self, PolicyError> {
        let q = QFunction::new(
            QDims {
                state_dim: dims.state_dim,
                d_emb: config.d_emb,
                hidden: config.hidden,
                n_actions: dims.n_actions,
                n_opposite: dims.n_opposite,
            },
            config.activation,
            rng,
        )?;
        Ok(Self {
            q,
            config,
            placeholder: dims.placeholder,
            steps: 0,
        })
    }

    fn values(&self, store: &crate::nn::ParamStore, s: &[f64]) -> Result<Vec<f64>, PolicyError> {
        Ok(self.q.net.q_values(store, s, OppInput::Index(self.placeholder))?)
    }

    /// Runs one episode and one update; returns the actions taken.
    pub fn episode<E: RlEnv, R: Rng>(
        &mut self,
        env: &mut E,
        buf: &mut ReplayBuffer,
        episode: usize,
        seed: u64,
        rng: &mut R,
    ) -> Result<Vec<usize>, PolicyError> {
        let eps = self.config.epsilon(episode);
        let n = self.q.net.n_actions;
        let mut actions = Vec::new();
        let mut s = env.reset(seed)?;
        loop {
            let mask = env.mask();
            let a = if rng.random::<f64>() < eps {
                match &mask {
                    None => rng.random_range(0..n),
                    Some(m) => {
                        let legal: Vec<usize> = (0..n).filter(|i| m[*i]).collect();
                        legal[rng.random_range(0..legal.len())]
                    }
                }
            } else {
                masked_argmax(&self.values(&self.q.store, &s)?, mask.as_deref())
            };
            let (s2, r) = env.step(a)?;
            actions.push(a);
            buf.push(Transition {
                state: s,
                mask,
                opp_est: self.placeholder,
                opp_soft: None,
                action: a,
                reward: r.reward,
                next_state: s2.clone(),
                next_mask: env.mask(),
                next_opp_est: self.placeholder,
                next_opp_soft: None,
                done: r.done,
                opp_observed: r.opposite,
            });
            s = s2;
            if r.done {
                break;
            }
        }

        let batch: Vec<Transition> = buf.sample(self.config.batch_size, rng)?.into_iter().cloned().collect();
        let mut ys = Vec::with_capacity(batch.len());
        for t in &batch {
            ys.push(if t.done || self.config.gamma_q == 0.0 {
                t.reward
            } else {
                let v = self.values(&self.q.target, &t.next_state)?;
                t.reward + self.config.gamma_q * v[masked_argmax(&v, t.next_mask.as_deref())]
            });
        }
        let grads = {
            let mut tape = Tape::new(&self.q.store);
            let mut sq = Vec::new();
            for (t, y) in batch.iter().zip(&ys) {
                let x = tape.input_vec(t.state.clone());
                let aug = self.q.net.augment(&mut tape, x, OppInput::Index(self.placeholder))?;
                let q = self.q.net.forward(&mut tape, aug)?;
                let qa = tape.pick(q, t.action)?;
                let yv = tape.input_vec(vec![*y]);
                let d = tape.sub(qa, yv)?;
                sq.push(tape.mul(d, d)?);
            }
            let loss = tape.mean(&sq)?;
            tape.backward(loss)?
        };
        apply(&mut self.q.store, &grads, self.config.lr)?;
        self.steps += 1;
        if self.steps.is_multiple_of(self.config.sync_period as u64) {
            self.q.sync_target()?;
        }
        Ok(actions)
    }
}
