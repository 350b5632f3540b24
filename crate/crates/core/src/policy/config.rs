use serde::{Deserialize, Serialize};

use crate::nn::Activation;

use super::PolicyError;

/// Hyperparameters of one learner. Defaults follow the reference settings;
/// only the buffer size and sync period come from published values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of `episodes` over which ε decays linearly.
    pub eps_decay_frac: f64,
    /// Discount of the Bellman target.
    pub gamma_q: f64,
    pub beta0: f64,
    /// Per-epoch multiplicative decay of β.
    pub gamma_beta: f64,
    pub epoch_episodes: usize,
    pub w1: f64,
    pub w2: f64,
    /// Temperature of the candidate distribution.
    pub tau: f64,
    /// Target network sync period, in training iterations.
    pub sync_period: usize,
    pub batch_size: usize,
    pub updates_per_episode: usize,
    pub lr: f64,
    pub estimator_lr: f64,
    pub episodes: usize,
    pub seed: u64,
    pub use_obe: bool,
    pub use_action_reg: bool,
    /// Use the probability-weighted embedding instead of the argmax row.
    pub soft_embedding: bool,
    /// Keep the regularizer out of the Q gradient.
    pub reg_stop_gradient: bool,
    /// Keep training the estimator on observed replies during RL.
    pub online_estimator: bool,
    pub buffer_capacity: usize,
    pub hidden: usize,
    pub estimator_hidden: usize,
    pub d_emb: usize,
    pub activation: Activation,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            eps_start: 0.2,
            eps_end: 0.01,
            eps_decay_frac: 0.6,
            gamma_q: 0.99,
            beta0: 1.0,
            gamma_beta: 0.95,
            epoch_episodes: 50,
            w1: 1.0,
            w2: 1.0,
            tau: 1.0,
            sync_period: 1,
            batch_size: 32,
            updates_per_episode: 1,
            lr: 1e-3,
            estimator_lr: 1e-3,
            episodes: 1000,
            seed: 0,
            use_obe: true,
            use_action_reg: true,
            soft_embedding: false,
            reg_stop_gradient: false,
            online_estimator: true,
            buffer_capacity: 500,
            hidden: 256,
            estimator_hidden: 256,
            d_emb: 16,
            activation: Activation::Tanh,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma_q) {
            return bad("gamma_q must lie in [0, 1]");
        }
        if !(self.gamma_beta > 0.0 && self.gamma_beta <= 1.0) {
            return bad("gamma_beta must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.sync_period == 0 {
            return bad("sync_period must be at least 1");
        }
        if self.tau <= 0.0 {
            return bad("tau must be positive");
        }
        if self.beta0 < 0.0 {
            return bad("beta0 must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.epoch_episodes == 0 {
            return bad("batch_size, buffer_capacity and epoch_episodes must be positive");
        }
        if self.hidden == 0 || self.estimator_hidden == 0 || self.d_emb == 0 {
            return bad("layer sizes must be positive");
        }
        Ok(())
    }

    /// ε after `episode` episodes of a run of `self.episodes`.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = (self.episodes as f64 * self.eps_decay_frac).max(1.0);
        let t = (episode as f64 / span).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * t
    }

    /// β in force during `episode`.
    pub fn beta(&self, episode: usize) -> f64 {
        let mut b = self.beta0;
        for _ in 0..episode / self.epoch_episodes {
            b = super::ops::decay_beta(b, self.gamma_beta);
        }
        b
    }
}
