use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::EnvConfig;
use crate::policy::{PretrainSample, RlEnv};

use super::config::{CorpusConfig, OpponentKind};
use super::eval::MAX_EPISODE_STEPS;
use super::task::TaskEnv;
use super::{derive_seed, HarnessError};

/// Seed stream of corpus episodes.
pub const CORPUS_STREAM: u64 = 3;

/// Scripted-expert rollouts with random deviations.
///
/// Every visited state is labelled with the expert act; the rollout follows
/// the expert except for an `explore` fraction of uniformly random legal acts,
/// so the estimator also sees replies to non-expert acts.
pub fn generate_corpus(
    env_cfg: &EnvConfig,
    opponent: &OpponentKind,
    cfg: &CorpusConfig,
) -> Result<Vec<PretrainSample>, HarnessError> {
    let mut env = TaskEnv::new(env_cfg, opponent, derive_seed(cfg.seed, CORPUS_STREAM, u64::MAX))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for ep in 0..cfg.episodes {
        let mut state = env.reset(derive_seed(cfg.seed, CORPUS_STREAM, ep as u64))?;
        for _ in 0..MAX_EPISODE_STEPS {
            let mask = env.mask();
            let expert = env.expert_action()?;
            let taken = if rng.random::<f64>() < cfg.explore {
                let legal: Vec<usize> = (0..env.n_actions())
                    .filter(|i| mask.as_ref().is_none_or(|m| m[*i]))
                    .collect();
                legal[rng.random_range(0..legal.len())]
            } else {
                expert
            };
            let (next, r) = env.step(taken)?;
            out.push(PretrainSample {
                state: std::mem::replace(&mut state, next),
                mask,
                expert_action: expert,
                taken_action: taken,
                opposite_next: r.opposite,
            });
            if r.done {
                break;
            }
        }
    }
    Ok(out)
}
