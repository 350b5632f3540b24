//! Session-outcome prediction for when the environment hands back no reward:
//! act tokens, a BiGRU-with-attention encoder, per-issue classifiers and the
//! task reward over the predicted division.

mod corpus;
mod model;
mod vocab;

use thiserror::Error;

use crate::domain::{DomainError, ItemCounts, NUM_ITEMS};
use crate::envs::EnvError;
use crate::nn::NnError;

pub use corpus::{synthetic_corpus, RewardExample};
pub use model::{accuracy, decode_output, train_reward_model, Encoded, RewardModel, RewardModelConfig, RewardReport};
pub use vocab::{goal_strings, session_strings, SessionTokens, Vocab, OTHER_MARK, SELF_MARK, UNK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("empty session")]
    EmptySession,
    #[error("token index {0} outside the vocabulary")]
    UnknownToken(usize),
    #[error("issue/scenario mismatch: {0}")]
    IssueMismatch(String),
    #[error("infeasible outcome {outcome:?} for counts {counts:?}")]
    InfeasibleOutcome { outcome: Vec<u32>, counts: ItemCounts },
    #[error("empty corpus")]
    EmptyCorpus,
}

/// `Σ_i o_i · value_i` for a division that fits the item pool.
pub fn task_reward(outcome: &[u32], counts: &ItemCounts, values: &ItemCounts) -> Result<u32, RewardError> {
    if outcome.len() != NUM_ITEMS || outcome.iter().zip(counts).any(|(o, c)| o > c) {
        return Err(RewardError::InfeasibleOutcome {
            outcome: outcome.to_vec(),
            counts: *counts,
        });
    }
    Ok(outcome.iter().zip(values).map(|(o, v)| o * v).sum())
}

/// Reward of a session judged by the model: the predicted division, clipped
/// to the pool, valued with the agent's own values.
pub fn predicted_reward(
    model: &RewardModel,
    session: &SessionTokens,
    counts: &ItemCounts,
    values: &ItemCounts,
) -> Result<u32, RewardError> {
    let mut outcome = decode_output(&model.predict_issues(session)?);
    for (o, c) in outcome.iter_mut().zip(counts) {
        *o = (*o).min(*c);
    }
    task_reward(&outcome, counts, values)
}
