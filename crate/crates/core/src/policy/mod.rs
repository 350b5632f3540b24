//! Opposite-aware Q-learning: the estimator, the augmented Q network,
//! candidate sampling, the regularized loss, replay, pretraining, and the
//! DQN / REINFORCE baselines.

mod agent;
mod buffer;
mod config;
mod networks;
mod ops;
mod pretrain;
mod reference;
mod reinforce;
mod rl_env;

use thiserror::Error;

use crate::domain::DomainError;
use crate::envs::EnvError;
use crate::nn::NnError;

pub use agent::{
    estimator_loss, estimator_step, q_batch_loss, EnvDims, EpisodeStats, OppEstimate, OppaAgent, UpdateStats,
};
pub use buffer::{buffer_push, buffer_sample, ReplayBuffer, Transition};
pub use config::TrainingConfig;
pub use networks::{masked_softmax, OppInput, OppositeEstimator, QDims, QFunction, QNet};
pub use ops::{
    augment_state, bellman_target, bellman_value, candidate_distribution, decay_beta, dqn_loss, estimate_opposite,
    masked_max, reg_loss, sample_candidate, sample_from, select_action, total_loss,
};
pub use pretrain::{
    candidate_action, estimator_accuracy, imitation_accuracy, pretrain, pretrain_policy_net, PretrainConfig,
    PretrainReport, PretrainSample,
};
pub use reference::VanillaDqn;
pub use reinforce::{reinforce_loss, reinforce_update, EpisodeTrace, PolicyNet, ReinforceAgent};
pub use rl_env::{ChainMdp, EncodedEnv, RlEnv, CHAIN_LEFT, CHAIN_RIGHT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty pretraining corpus")]
    EmptyCorpus,
    #[error("empty episode")]
    EmptyEpisode,
}
