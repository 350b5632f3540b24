//! The per-step operations of the opposite-aware learner and its losses.

use rand::Rng;

use crate::nn::{argmax, cross_entropy, masked_argmax, one_hot, softmax};

use super::networks::{masked_softmax, OppInput, OppositeEstimator, QFunction};
use super::PolicyError;

/// Draw a candidate target act from `softmax(Q([s ∥ E°[placeholder]]) / τ)`.
///
/// With `greedy` the argmax of the distribution is returned instead of a sample.
pub fn sample_candidate<R: Rng>(
    state: &[f64],
    q: &QFunction,
    placeholder: usize,
    tau: f64,
    mask: Option<&[bool]>,
    greedy: bool,
    rng: &mut R,
) -> Result<(usize, Vec<f64>), PolicyError> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(PolicyError::InvalidTemperature(tau));
    }
    let values = q.q_values(state, OppInput::Index(placeholder))?;
    let dist = masked_softmax(&values, tau, mask)?;
    let pick = if greedy {
        masked_argmax(&values, mask)
    } else {
        sample_from(&dist, rng)
    };
    Ok((pick, dist))
}

/// Inverse-CDF draw from a distribution.
pub fn sample_from<R: Rng>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in dist.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Predict the opposite agent's reply to candidate `action`; ties go to the lowest index.
pub fn estimate_opposite(
    state: &[f64],
    action: usize,
    est: &OppositeEstimator,
) -> Result<(usize, Vec<f64>), PolicyError> {
    let dist = est.distribution(state, action)?;
    Ok((argmax(&dist), dist))
}

/// `[s ∥ E°[a°']]`.
pub fn augment_state(state: &[f64], opp: usize, q: &QFunction) -> Result<Vec<f64>, PolicyError> {
    Ok(q.net.augmented(&q.store, state, OppInput::Index(opp))?)
}

/// ε-greedy choice over the legal acts of an augmented state.
pub fn select_action<R: Rng>(
    augmented: &[f64],
    q: &QFunction,
    epsilon: f64,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<usize, PolicyError> {
    if rng.random::<f64>() < epsilon {
        return Ok(random_legal(q.net.n_actions, mask, rng));
    }
    let values = q.net.q_of_augmented(&q.store, augmented)?;
    Ok(masked_argmax(&values, mask))
}

pub(crate) fn random_legal<R: Rng>(n: usize, mask: Option<&[bool]>, rng: &mut R) -> usize {
    match mask {
        None => rng.random_range(0..n),
        Some(m) => {
            let legal: Vec<usize> = (0..n).filter(|i| m[*i]).collect();
            if legal.is_empty() {
                rng.random_range(0..n)
            } else {
                legal[rng.random_range(0..legal.len())]
            }
        }
    }
}

/// Largest entry among the legal positions.
pub fn masked_max(values: &[f64], mask: Option<&[bool]>) -> f64 {
    values[masked_argmax(values, mask)]
}

/// `y = r` at terminal steps, else `r + γ·max_a' Q'(ŝ', a')`.
pub fn bellman_value(reward: f64, max_next_q: f64, done: bool, gamma_q: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma_q * max_next_q
    }
}

/// Bellman target against the target copy `θ_Q'` for an augmented next state.
pub fn bellman_target(
    reward: f64,
    next_augmented: &[f64],
    next_mask: Option<&[bool]>,
    done: bool,
    q: &QFunction,
    gamma_q: f64,
) -> Result<f64, PolicyError> {
    if done || gamma_q == 0.0 {
        return Ok(reward);
    }
    let values = q.net.q_of_augmented(&q.target, next_augmented)?;
    Ok(bellman_value(reward, masked_max(&values, next_mask), done, gamma_q))
}

/// Mean squared error between predicted Q(ŝ, a) and targets.
pub fn dqn_loss(predicted: &[f64], targets: &[f64]) -> Result<f64, PolicyError> {
    if predicted.is_empty() {
        return Err(PolicyError::EmptyBatch);
    }
    if predicted.len() != targets.len() {
        return Err(PolicyError::InvalidConfig(format!(
            "{} predictions for {} targets",
            predicted.len(),
            targets.len()
        )));
    }
    let n = predicted.len() as f64;
    Ok(predicted
        .iter()
        .zip(targets)
        .map(|(q, y)| (y - q) * (y - q))
        .sum::<f64>()
        / n)
}

/// `β · CE(onehot(executed), â_dist)`.
pub fn reg_loss(candidate_dist: &[f64], executed: usize, beta: f64) -> Result<f64, PolicyError> {
    if beta == 0.0 {
        return Ok(0.0);
    }
    let target = one_hot(executed, candidate_dist.len());
    Ok(beta * cross_entropy(&target, candidate_dist)?)
}

pub fn decay_beta(beta: f64, gamma_beta: f64) -> f64 {
    beta * gamma_beta
}

pub fn total_loss(l1: f64, l2: f64, w1: f64, w2: f64) -> f64 {
    w1 * l1 + w2 * l2
}

/// Plain softmax over Q-values scaled by `1/τ`.
pub fn candidate_distribution(values: &[f64], tau: f64) -> Result<Vec<f64>, PolicyError> {
    if tau <= 0.0 {
        return Err(PolicyError::InvalidTemperature(tau));
    }
    Ok(softmax(&values.iter().map(|v| v * (1.0 / tau)).collect::<Vec<_>>())?)
}
