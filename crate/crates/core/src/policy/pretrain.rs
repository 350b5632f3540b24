use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{argmax, masked_argmax, one_hot, Tape, Var};

use super::agent::{apply, estimator_step, OppaAgent};
use super::networks::{masked_softmax_node, OppInput};
use super::PolicyError;

/// One supervised example from a scripted rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainSample {
    pub state: Vec<f64>,
    pub mask: Option<Vec<bool>>,
    /// What the scripted expert would do here.
    pub expert_action: usize,
    /// What the rollout actually did (differs under exploration).
    pub taken_action: usize,
    /// The opposite agent's reply to `taken_action`, if it replied.
    pub opposite_next: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub holdout_frac: f64,
    pub train_q: bool,
    pub train_estimator: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            holdout_frac: 0.2,
            train_q: true,
            train_estimator: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub samples: usize,
    pub heldout: usize,
    pub estimator_train_accuracy: Option<f64>,
    pub estimator_heldout_accuracy: Option<f64>,
    pub q_train_accuracy: Option<f64>,
    pub q_heldout_accuracy: Option<f64>,
}

fn accuracy(hits: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut n, mut k) = (0usize, 0usize);
    for h in hits {
        n += 1;
        k += usize::from(h);
    }
    (n > 0).then(|| k as f64 / n as f64)
}

/// Fraction of samples whose observed reply the estimator predicts.
pub fn estimator_accuracy(agent: &OppaAgent, samples: &[&PretrainSample]) -> Result<Option<f64>, PolicyError> {
    let Some(est) = &agent.estimator else {
        return Ok(None);
    };
    let mut hits = Vec::new();
    for s in samples {
        if let Some(o) = s.opposite_next {
            hits.push(argmax(&est.distribution(&s.state, s.taken_action)?) == o);
        }
    }
    Ok(accuracy(hits.into_iter()))
}

/// Fraction of samples where the greedy policy picks the expert action.
pub fn imitation_accuracy(agent: &OppaAgent, samples: &[&PretrainSample]) -> Result<Option<f64>, PolicyError> {
    let mut hits = Vec::with_capacity(samples.len());
    for s in samples {
        hits.push(agent.greedy_action(&s.state, s.mask.as_deref())? == s.expert_action);
    }
    Ok(accuracy(hits.into_iter()))
}

/// Supervised estimator training, then imitation of the expert by Q.
///
/// Q sees `[s ∥ E°[a°']]` with `a°'` the estimator's reply to the expert
/// act, and cross-entropy of `softmax(Q)` toward the expert act; with the
/// regularizer on, the placeholder path gets the same target scaled by β₀.
pub fn pretrain<R: Rng>(
    agent: &mut OppaAgent,
    corpus: &[PretrainSample],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainReport, PolicyError> {
    if corpus.is_empty() {
        return Err(PolicyError::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(rng);
    let n_hold = ((corpus.len() as f64) * cfg.holdout_frac).round() as usize;
    let n_hold = n_hold.min(corpus.len() - 1);
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let train: Vec<&PretrainSample> = train_idx.iter().map(|i| &corpus[*i]).collect();
    let hold: Vec<&PretrainSample> = hold_idx.iter().map(|i| &corpus[*i]).collect();
    let bs = cfg.batch_size.max(1);

    if let Some(est) = agent.estimator.as_mut().filter(|_| cfg.train_estimator) {
        let observed: Vec<&PretrainSample> = train.iter().copied().filter(|s| s.opposite_next.is_some()).collect();
        let mut idx: Vec<usize> = (0..observed.len()).collect();
        for _ in 0..cfg.epochs {
            idx.shuffle(rng);
            for chunk in idx.chunks(bs) {
                let samples: Vec<(&[f64], usize, usize)> = chunk
                    .iter()
                    .map(|i| {
                        let s = observed[*i];
                        (s.state.as_slice(), s.taken_action, s.opposite_next.expect("filtered"))
                    })
                    .collect();
                estimator_step(est, &samples, cfg.lr)?;
            }
        }
    }

    if cfg.train_q {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        for _ in 0..cfg.epochs {
            idx.shuffle(rng);
            for chunk in idx.chunks(bs) {
                let batch: Vec<&PretrainSample> = chunk.iter().map(|i| train[*i]).collect();
                let opp = imitation_inputs(agent, &batch)?;
                let grads = {
                    let mut tape = Tape::new(&agent.q.store);
                    let loss = imitation_loss(&mut tape, agent, &batch, &opp)?;
                    tape.backward(loss)?
                };
                apply(&mut agent.q.store, &grads, cfg.lr)?;
            }
        }
        agent.q.sync_target()?;
    }

    Ok(PretrainReport {
        samples: corpus.len(),
        heldout: hold.len(),
        estimator_train_accuracy: estimator_accuracy(agent, &train)?,
        estimator_heldout_accuracy: estimator_accuracy(agent, &hold)?,
        q_train_accuracy: imitation_accuracy(agent, &train)?,
        q_heldout_accuracy: imitation_accuracy(agent, &hold)?,
    })
}

/// Opposite estimate per sample: the estimator's reply to the expert act.
fn imitation_inputs(agent: &OppaAgent, batch: &[&PretrainSample]) -> Result<Vec<usize>, PolicyError> {
    batch
        .iter()
        .map(|s| match &agent.estimator {
            Some(est) => Ok(argmax(&est.distribution(&s.state, s.expert_action)?)),
            None => Ok(agent.placeholder),
        })
        .collect()
}

fn imitation_loss(
    tape: &mut Tape,
    agent: &OppaAgent,
    batch: &[&PretrainSample],
    opp: &[usize],
) -> Result<Var, PolicyError> {
    let net = &agent.q.net;
    let cfg = &agent.config;
    let mut terms = Vec::with_capacity(batch.len());
    for (s, o) in batch.iter().zip(opp) {
        let target = one_hot(s.expert_action, net.n_actions);
        let x = tape.input_vec(s.state.clone());
        let aug = net.augment(tape, x, OppInput::Index(*o))?;
        let q = net.forward(tape, aug)?;
        let p = masked_softmax_node(tape, q, 1.0, s.mask.as_deref())?;
        let mut term = tape.cross_entropy(&target, p)?;
        if cfg.use_action_reg && cfg.beta0 > 0.0 && agent.estimator.is_some() {
            let ph = net.augment(tape, x, OppInput::Index(agent.placeholder))?;
            let qp = net.forward(tape, ph)?;
            let pp = masked_softmax_node(tape, qp, cfg.tau, s.mask.as_deref())?;
            let ce = tape.cross_entropy(&target, pp)?;
            let ce = tape.scale(ce, cfg.beta0);
            term = tape.add(term, ce)?;
        }
        terms.push(term);
    }
    Ok(tape.mean(&terms)?)
}

/// Greedy candidate under the placeholder path; exposed for diagnostics.
pub fn candidate_action(agent: &OppaAgent, state: &[f64], mask: Option<&[bool]>) -> Result<usize, PolicyError> {
    let values = agent.q.q_values(state, OppInput::Index(agent.placeholder))?;
    Ok(masked_argmax(&values, mask))
}

/// Imitation of the expert act by a softmax policy network.
pub fn pretrain_policy_net<R: Rng>(
    net: &mut super::reinforce::PolicyNet,
    corpus: &[PretrainSample],
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainReport, PolicyError> {
    if corpus.is_empty() {
        return Err(PolicyError::EmptyCorpus);
    }
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(cfg.batch_size.max(1)) {
            let grads = {
                let mut tape = Tape::new(&net.store);
                let mut terms = Vec::with_capacity(chunk.len());
                for i in chunk {
                    let s = &corpus[*i];
                    let x = tape.input_vec(s.state.clone());
                    let logits = net.mlp.forward(&mut tape, x)?;
                    let p = masked_softmax_node(&mut tape, logits, 1.0, s.mask.as_deref())?;
                    terms.push(tape.cross_entropy(&one_hot(s.expert_action, net.n_actions()), p)?);
                }
                let loss = tape.mean(&terms)?;
                tape.backward(loss)?
            };
            apply(&mut net.store, &grads, cfg.lr)?;
        }
    }
    let mut hits = Vec::with_capacity(corpus.len());
    for s in corpus {
        hits.push(net.greedy_action(&s.state, s.mask.as_deref())? == s.expert_action);
    }
    Ok(PretrainReport {
        samples: corpus.len(),
        q_train_accuracy: accuracy(hits.into_iter()),
        ..Default::default()
    })
}
