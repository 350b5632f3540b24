use serde::{Deserialize, Serialize};

use crate::domain::{CooperativeConfig, EnvConfig};
use crate::policy::{PretrainConfig, TrainingConfig};

use super::HarnessError;

/// The scripted counterpart in negotiation runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentKind {
    Threshold { start: u32, floor: u32 },
    AlwaysAgree,
    Random,
}

impl Default for OpponentKind {
    fn default() -> Self {
        OpponentKind::Threshold { start: 9, floor: 6 }
    }
}

/// Scripted-rollout corpus used for pretraining.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub episodes: usize,
    /// Probability of replacing the expert act with a random legal act.
    pub explore: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            explore: 0.3,
            seed: 7,
        }
    }
}

/// Everything one experiment needs. Given the same value, every run is deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub opponent: OpponentKind,
    pub training: TrainingConfig,
    /// Supervised/imitation stage before RL; skipped when absent.
    pub pretrain: Option<PretrainConfig>,
    pub corpus: CorpusConfig,
    /// Episodes between learning-curve snapshots.
    pub snapshot_every: usize,
    /// Greedy episodes evaluated at each snapshot.
    pub snapshot_episodes: usize,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    /// REINFORCE episodes per policy-gradient step.
    pub reinforce_batch: usize,
    pub reinforce_lr: f64,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::Cooperative(CooperativeConfig::default()),
            opponent: OpponentKind::default(),
            training: TrainingConfig::default(),
            pretrain: None,
            corpus: CorpusConfig::default(),
            snapshot_every: 50,
            snapshot_episodes: 20,
            eval_episodes: 100,
            seeds: vec![0, 1, 2, 3, 4],
            reinforce_batch: 8,
            reinforce_lr: 1e-3,
            out_dir: "runs".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.training.validate()?;
        if self.snapshot_every == 0 {
            return Err(HarnessError::InvalidConfig("snapshot_every must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidConfig("at least one seed is required".into()));
        }
        if !(0.0..=1.0).contains(&self.corpus.explore) {
            return Err(HarnessError::InvalidConfig("corpus.explore must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Number of learning-curve rows a training run emits.
    pub fn snapshot_count(&self) -> usize {
        self.training.episodes / self.snapshot_every
    }
}
