use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::EnvConfig;
use crate::nn::Checkpoint;
use crate::policy::{EnvDims, OppaAgent, OppositeEstimator, PolicyNet, QFunction, TrainingConfig};

use super::config::ExperimentConfig;
use super::task::TaskEnv;
use super::train::{TrainedPolicy, Variant};
use super::HarnessError;

/// Everything besides parameters needed to rebuild a trained policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMeta {
    pub variant: Variant,
    pub env: EnvConfig,
    pub training: TrainingConfig,
    pub dims: EnvDims,
    pub iterations: u64,
}

pub fn save_policy(policy: &TrainedPolicy, meta: &AgentMeta, dir: &Path) -> Result<(), HarnessError> {
    let ckpt = Checkpoint::new(serde_json::to_value(meta)?);
    let ckpt = match policy {
        TrainedPolicy::Oppa(a) => {
            let c = ckpt
                .with_store("q", a.q.store.clone())
                .with_store("q_target", a.q.target.clone());
            match &a.estimator {
                Some(e) => c.with_store("estimator", e.store.clone()),
                None => c,
            }
        }
        TrainedPolicy::Reinforce(p) => ckpt.with_store("policy", p.store.clone()),
    };
    ckpt.save(dir)?;
    Ok(())
}

pub fn load_policy(dir: &Path) -> Result<(TrainedPolicy, AgentMeta), HarnessError> {
    let ckpt = Checkpoint::load(dir)?;
    let meta: AgentMeta = serde_json::from_value(ckpt.meta.clone())?;
    let act = meta.training.activation;
    let policy = match meta.variant {
        Variant::Reinforce => TrainedPolicy::Reinforce(PolicyNet::from_store(ckpt.store("policy")?.clone(), act)?),
        _ => {
            let q = QFunction::from_stores(ckpt.store("q")?.clone(), ckpt.store("q_target")?.clone(), act)?;
            let estimator = if meta.training.use_obe {
                Some(OppositeEstimator::from_store(
                    ckpt.store("estimator")?.clone(),
                    meta.dims.state_dim,
                    act,
                )?)
            } else {
                None
            };
            TrainedPolicy::Oppa(OppaAgent {
                config: meta.training.clone(),
                q,
                estimator,
                placeholder: meta.dims.placeholder,
                iterations: meta.iterations,
            })
        }
    };
    Ok((policy, meta))
}

impl AgentMeta {
    /// Metadata for a policy trained under `cfg` as `variant`.
    pub fn describe(cfg: &ExperimentConfig, variant: Variant, policy: &TrainedPolicy) -> Result<Self, HarnessError> {
        let env = TaskEnv::new(&cfg.env, &cfg.opponent, 0)?;
        let (training, iterations) = match policy {
            TrainedPolicy::Oppa(a) => (a.config.clone(), a.iterations),
            TrainedPolicy::Reinforce(_) => (cfg.training.clone(), 0),
        };
        Ok(Self {
            variant,
            env: cfg.env.clone(),
            training,
            dims: EnvDims::of(&env),
            iterations,
        })
    }
}
