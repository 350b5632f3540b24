//! Experiment orchestration: corpus generation, pretraining, RL training,
//! greedy evaluation, cross-play, ablations, checkpoints and reports.

mod ablation;
mod checkpoint;
mod config;
mod corpus;
mod crossplay;
mod eval;
mod report;
mod task;
mod train;

use thiserror::Error;

use crate::domain::DomainError;
use crate::envs::EnvError;
use crate::nn::{CheckpointError, NnError};
use crate::policy::PolicyError;

pub use ablation::{evaluate_variant, run_ablations, run_crossplay_battery, AblationReport, CrossplayBattery};
pub use checkpoint::{load_policy, save_policy, AgentMeta};
pub use config::{CorpusConfig, ExperimentConfig, OpponentKind};
pub use corpus::{generate_corpus, CORPUS_STREAM};
pub use crossplay::{run_crossplay, CrossplayResult, CrossplayRow, PolicyNegotiator, CROSSPLAY_STREAM};
pub use eval::{
    check_compatible, rollout, run_eval, summarize, EvalReport, MetricSummary, EVAL_STREAM, MAX_EPISODE_STEPS,
};
pub use report::{metric_rows, read_csv, render_table, to_csv_string, write_csv, MetricRow};
pub use task::{build_negotiator, ExpertPolicy, Policy, RandomPolicy, TaskEnv};
pub use train::{
    build_agent, primary_metric, run_pretrain, run_train, train_agent, CurveRow, TrainOutcome, TrainedPolicy, Variant,
    AGENT_STREAM, OPPONENT_STREAM, SNAPSHOT_STREAM, TRAIN_STREAM,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
    #[error("episode exceeded {0} steps")]
    Runaway(usize),
}

/// Independent seed for item `index` of stream `stream` under `seed` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
