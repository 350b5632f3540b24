use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{adam_step, masked_argmax, one_hot, AdamConfig, Gradients, NnError, ParamStore, Tape, Var};

use super::buffer::{ReplayBuffer, Transition};
use super::config::TrainingConfig;
use super::networks::{masked_softmax_node, OppInput, OppositeEstimator, QDims, QFunction};
use super::ops::{bellman_value, estimate_opposite, masked_max, random_legal, sample_candidate};
use super::rl_env::RlEnv;
use super::PolicyError;

/// How the opposite estimate for one state was formed.
#[derive(Clone, Debug, PartialEq)]
pub struct OppEstimate {
    pub index: usize,
    /// Full predicted distribution when the soft embedding is in use.
    pub soft: Option<Vec<f64>>,
    pub candidate: Option<usize>,
}

impl OppEstimate {
    fn input(&self) -> OppInput<'_> {
        match &self.soft {
            Some(p) => OppInput::Soft(p),
            None => OppInput::Index(self.index),
        }
    }
}

/// Per-episode training statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub total_reward: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub dqn_loss: f64,
    pub reg_loss: f64,
    pub estimator_loss: f64,
    /// Actions taken by the target agent, in order.
    pub actions: Vec<usize>,
}

/// Loss values of one minibatch update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub dqn_loss: f64,
    pub reg_loss: f64,
    pub estimator_loss: f64,
}

/// Opposite-aware DQN learner. With `use_obe` off it is a plain DQN whose
/// state is always augmented with the placeholder embedding.
#[derive(Clone, Debug)]
pub struct OppaAgent {
    pub config: TrainingConfig,
    pub q: QFunction,
    pub estimator: Option<OppositeEstimator>,
    pub placeholder: usize,
    pub iterations: u64,
}

/// Sizes an agent needs from its environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvDims {
    pub state_dim: usize,
    pub n_actions: usize,
    pub n_opposite: usize,
    pub placeholder: usize,
}

impl EnvDims {
    pub fn of<E: RlEnv>(env: &E) -> Self {
        Self {
            state_dim: env.state_dim(),
            n_actions: env.n_actions(),
            n_opposite: env.n_opposite(),
            placeholder: env.placeholder(),
        }
    }
}

impl OppaAgent {
    /// Q parameters are drawn first so every variant shares them under one seed.
    pub fn new<R: Rng>(dims: EnvDims, config: TrainingConfig, rng: &mut R) -> Result<Self, PolicyError> {
        config.validate()?;
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
        let estimator = if config.use_obe {
            Some(OppositeEstimator::new(
                dims.state_dim,
                dims.n_actions,
                config.estimator_hidden,
                dims.n_opposite,
                config.activation,
                rng,
            )?)
        } else {
            None
        };
        Ok(Self {
            config,
            q,
            estimator,
            placeholder: dims.placeholder,
            iterations: 0,
        })
    }

    pub fn dims(&self) -> EnvDims {
        EnvDims {
            state_dim: self.q.net.state_dim,
            n_actions: self.q.net.n_actions,
            n_opposite: self.q.net.n_opposite,
            placeholder: self.placeholder,
        }
    }

    /// The estimator's reply to `candidate`, or the placeholder when the estimator is off.
    fn estimate_for(&self, state: &[f64], candidate: Option<usize>) -> Result<OppEstimate, PolicyError> {
        match (&self.estimator, candidate) {
            (Some(est), Some(cand)) => {
                let (index, dist) = estimate_opposite(state, cand, est)?;
                Ok(OppEstimate {
                    index,
                    soft: self.config.soft_embedding.then_some(dist),
                    candidate: Some(cand),
                })
            }
            _ => Ok(OppEstimate {
                index: self.placeholder,
                soft: None,
                candidate: None,
            }),
        }
    }

    /// Evaluation-mode action: greedy candidate, argmax estimate, argmax Q.
    pub fn greedy_action(&self, state: &[f64], mask: Option<&[bool]>) -> Result<usize, PolicyError> {
        let candidate = match self.estimator {
            Some(_) => Some(masked_argmax(
                &self.q.q_values(state, OppInput::Index(self.placeholder))?,
                mask,
            )),
            None => None,
        };
        let opp = self.estimate_for(state, candidate)?;
        let values = self.q.q_values(state, opp.input())?;
        Ok(masked_argmax(&values, mask))
    }

    /// Training-mode action: ε branch first, then the opposite-aware argmax.
    pub fn act<R: Rng>(
        &self,
        state: &[f64],
        mask: Option<&[bool]>,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<(usize, OppEstimate), PolicyError> {
        let explore = rng.random::<f64>() < epsilon;
        let candidate = match self.estimator {
            Some(_) => {
                let (c, _) = sample_candidate(state, &self.q, self.placeholder, self.config.tau, mask, false, rng)?;
                Some(c)
            }
            None => None,
        };
        let opp = self.estimate_for(state, candidate)?;
        let action = if explore {
            random_legal(self.q.net.n_actions, mask, rng)
        } else {
            let values = self.q.q_values(state, opp.input())?;
            masked_argmax(&values, mask)
        };
        Ok((action, opp))
    }

    /// One episode of the training loop followed by one minibatch update.
    pub fn train_iteration<E: RlEnv, R: Rng>(
        &mut self,
        env: &mut E,
        buf: &mut ReplayBuffer,
        episode: usize,
        env_seed: u64,
        rng: &mut R,
    ) -> Result<EpisodeStats, PolicyError> {
        let epsilon = self.config.epsilon(episode);
        let beta = self.config.beta(episode);
        let mut stats = EpisodeStats {
            episode,
            epsilon,
            beta,
            ..Default::default()
        };
        let mut state = env.reset(env_seed)?;
        let mut pending: Option<Transition> = None;
        loop {
            let mask = env.mask();
            let (action, opp) = self.act(&state, mask.as_deref(), epsilon, rng)?;
            if let Some(mut t) = pending.take() {
                t.next_opp_est = opp.index;
                t.next_opp_soft = opp.soft.clone();
                buf.push(t);
            }
            let (next, r) = env.step(action)?;
            stats.total_reward += r.reward;
            stats.steps += 1;
            stats.actions.push(action);
            let t = Transition {
                state: std::mem::replace(&mut state, next.clone()),
                mask,
                opp_est: opp.index,
                opp_soft: opp.soft,
                action,
                reward: r.reward,
                next_state: next,
                next_mask: env.mask(),
                next_opp_est: self.placeholder,
                next_opp_soft: None,
                done: r.done,
                opp_observed: r.opposite,
            };
            if r.done {
                buf.push(t);
                break;
            }
            pending = Some(t);
        }
        let u = self.update(buf, beta, rng)?;
        stats.dqn_loss = u.dqn_loss;
        stats.reg_loss = u.reg_loss;
        stats.estimator_loss = u.estimator_loss;
        Ok(stats)
    }

    /// Minibatch step on `w1·L1 + w2·L2`, the online estimator step, and the target sync.
    pub fn update<R: Rng>(&mut self, buf: &ReplayBuffer, beta: f64, rng: &mut R) -> Result<UpdateStats, PolicyError> {
        let mut stats = UpdateStats::default();
        for _ in 0..self.config.updates_per_episode {
            let batch: Vec<Transition> = buf.sample(self.config.batch_size, rng)?.into_iter().cloned().collect();
            let targets = self.targets(&batch)?;
            let (l1, l2, grads) = {
                let mut tape = Tape::new(&self.q.store);
                let (loss, l1, l2) = q_batch_loss(&mut tape, self, &batch, &targets, beta)?;
                let l1 = tape.scalar(l1);
                let l2 = l2.map_or(0.0, |v| tape.scalar(v));
                (l1, l2, tape.backward(loss)?)
            };
            apply(&mut self.q.store, &grads, self.config.lr)?;
            stats.dqn_loss = l1;
            stats.reg_loss = l2;

            if self.config.online_estimator {
                let observed: Vec<&Transition> = batch.iter().filter(|t| t.opp_observed.is_some()).collect();
                if let (Some(est), false) = (self.estimator.as_mut(), observed.is_empty()) {
                    let samples: Vec<(&[f64], usize, usize)> = observed
                        .iter()
                        .map(|t| (t.state.as_slice(), t.action, t.opp_observed.expect("filtered")))
                        .collect();
                    stats.estimator_loss = estimator_step(est, &samples, self.config.estimator_lr)?;
                }
            }

            self.iterations += 1;
            if self.iterations.is_multiple_of(self.config.sync_period as u64) {
                self.q.sync_target()?;
            }
        }
        Ok(stats)
    }

    /// Bellman targets from the target copy, treated as constants.
    pub fn targets(&self, batch: &[Transition]) -> Result<Vec<f64>, PolicyError> {
        batch
            .iter()
            .map(|t| {
                if t.done || self.config.gamma_q == 0.0 {
                    return Ok(t.reward);
                }
                let input = match &t.next_opp_soft {
                    Some(p) => OppInput::Soft(p),
                    None => OppInput::Index(t.next_opp_est),
                };
                let values = self.q.target_q_values(&t.next_state, input)?;
                Ok(bellman_value(
                    t.reward,
                    masked_max(&values, t.next_mask.as_deref()),
                    t.done,
                    self.config.gamma_q,
                ))
            })
            .collect()
    }
}

/// Builds `w1·L1 + w2·L2` on `tape`; returns (total, L1, L2 if present).
///
/// `tape` must be bound to a store with the agent's Q layout.
pub fn q_batch_loss(
    tape: &mut Tape,
    agent: &OppaAgent,
    batch: &[Transition],
    targets: &[f64],
    beta: f64,
) -> Result<(Var, Var, Option<Var>), PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let cfg = &agent.config;
    let net = &agent.q.net;
    let mut sq = Vec::with_capacity(batch.len());
    let mut ce = Vec::new();
    let with_reg = cfg.use_action_reg && !cfg.reg_stop_gradient && beta > 0.0;
    for (t, y) in batch.iter().zip(targets) {
        let s = tape.input_vec(t.state.clone());
        let input = match &t.opp_soft {
            Some(p) => OppInput::Soft(p),
            None => OppInput::Index(t.opp_est),
        };
        let aug = net.augment(tape, s, input)?;
        let qv = net.forward(tape, aug)?;
        let qa = tape.pick(qv, t.action)?;
        let yv = tape.input_vec(vec![*y]);
        let d = tape.sub(qa, yv)?;
        sq.push(tape.mul(d, d)?);
        if with_reg {
            let ph = net.augment(tape, s, OppInput::Index(agent.placeholder))?;
            let qp = net.forward(tape, ph)?;
            let dist = masked_softmax_node(tape, qp, cfg.tau, t.mask.as_deref())?;
            ce.push(tape.cross_entropy(&one_hot(t.action, net.n_actions), dist)?);
        }
    }
    let l1 = tape.mean(&sq)?;
    let mut total = scaled(tape, l1, cfg.w1);
    let l2 = if with_reg {
        let m = tape.mean(&ce)?;
        let l2 = tape.scale(m, beta);
        let w = scaled(tape, l2, cfg.w2);
        total = tape.add(total, w)?;
        Some(l2)
    } else {
        None
    };
    Ok((total, l1, l2))
}

fn scaled(tape: &mut Tape, v: Var, w: f64) -> Var {
    if w == 1.0 {
        v
    } else {
        tape.scale(v, w)
    }
}

/// Mean cross-entropy of the estimator on `(state, action, observed reply)` triples.
pub fn estimator_loss(
    tape: &mut Tape,
    est: &OppositeEstimator,
    samples: &[(&[f64], usize, usize)],
) -> Result<Var, PolicyError> {
    if samples.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    let mut ce = Vec::with_capacity(samples.len());
    for (s, a, o) in samples {
        let sv = tape.input_vec(s.to_vec());
        let p = est.forward(tape, sv, *a)?;
        ce.push(tape.cross_entropy(&one_hot(*o, est.n_opposite), p)?);
    }
    Ok(tape.mean(&ce)?)
}

/// One Adam step of the estimator; returns the loss before the step.
pub fn estimator_step(
    est: &mut OppositeEstimator,
    samples: &[(&[f64], usize, usize)],
    lr: f64,
) -> Result<f64, PolicyError> {
    let (loss, grads) = {
        let mut tape = Tape::new(&est.store);
        let l = estimator_loss(&mut tape, est, samples)?;
        (tape.scalar(l), tape.backward(l)?)
    };
    apply(&mut est.store, &grads, lr)?;
    Ok(loss)
}

pub(crate) fn apply(store: &mut ParamStore, grads: &Gradients, lr: f64) -> Result<(), NnError> {
    store.zero_grad();
    store.accumulate(grads)?;
    adam_step(
        store,
        &AdamConfig {
            lr,
            ..AdamConfig::default()
        },
    )
}
