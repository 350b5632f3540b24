use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::EnvConfig;
use crate::envs::{inform_f1, match_rate, pareto_optimal, success, Outcome, SessionRecord, SessionStatus};
use crate::policy::RlEnv;

use super::config::OpponentKind;
use super::task::{Policy, TaskEnv};
use super::{derive_seed, HarnessError};

/// Upper bound on target turns per episode; both tasks end well before it.
pub const MAX_EPISODE_STEPS: usize = 200;

/// Seed stream of evaluation episodes.
pub const EVAL_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Aggregated greedy-evaluation metrics; each metric is averaged per seed,
/// then summarized across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env: String,
    pub episodes_per_seed: usize,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, MetricSummary>,
}

impl EvalReport {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Plays one greedy episode; returns the finished record and the summed reward.
pub fn rollout(env: &mut TaskEnv, policy: &mut dyn Policy, seed: u64) -> Result<(SessionRecord, f64), HarnessError> {
    let mut state = env.reset(seed)?;
    let mut total = 0.0;
    for _ in 0..MAX_EPISODE_STEPS {
        let mask = env.mask();
        let a = policy.choose(env, &state, mask.as_deref())?;
        let (next, r) = env.step(a)?;
        total += r.reward;
        state = next;
        if r.done {
            return Ok((env.record(), total));
        }
    }
    Err(HarnessError::Runaway(MAX_EPISODE_STEPS))
}

/// Per-episode averages of the task metrics over `records`.
pub fn summarize(records: &[SessionRecord]) -> Result<BTreeMap<String, f64>, HarnessError> {
    let mut out = BTreeMap::new();
    let n = records.len().max(1) as f64;
    let Some(first) = records.first() else {
        return Ok(out);
    };
    match first.outcome {
        Outcome::Cooperative { .. } => {
            let (mut turns, mut f1, mut matched, mut ok) = (0.0, 0.0, 0.0, 0.0);
            for r in records {
                turns += f64::from(r.turns);
                f1 += inform_f1(r)?;
                matched += match_rate(r)?;
                ok += f64::from(u8::from(success(r)?));
            }
            out.insert("turns".into(), turns / n);
            out.insert("inform_f1".into(), 100.0 * f1 / n);
            out.insert("match".into(), 100.0 * matched / n);
            out.insert("success".into(), 100.0 * ok / n);
        }
        Outcome::Negotiation { .. } => {
            let (mut all, mut agreed_score, mut agreed, mut pareto) = (0.0, 0.0, 0usize, 0usize);
            for r in records {
                let Outcome::Negotiation {
                    scenario,
                    score_target,
                    score_opposite,
                    ..
                } = &r.outcome
                else {
                    return Err(crate::envs::EnvError::WrongEnvironment.into());
                };
                all += f64::from(*score_target);
                if r.status == SessionStatus::Agreed {
                    agreed += 1;
                    agreed_score += f64::from(*score_target);
                    if pareto_optimal(scenario, *score_target, *score_opposite) {
                        pareto += 1;
                    }
                }
            }
            out.insert("score_all".into(), all / n);
            out.insert(
                "score_agreed".into(),
                if agreed == 0 { 0.0 } else { agreed_score / agreed as f64 },
            );
            out.insert("agreed_pct".into(), 100.0 * agreed as f64 / n);
            out.insert(
                "pareto_pct".into(),
                if agreed == 0 {
                    0.0
                } else {
                    100.0 * pareto as f64 / agreed as f64
                },
            );
            out.insert(
                "turns".into(),
                records.iter().map(|r| f64::from(r.turns)).sum::<f64>() / n,
            );
        }
    }
    Ok(out)
}

/// Greedy evaluation of one policy over `episodes` per seed.
///
/// Episode `i` of seed `s` always uses the same environment seed, so any two
/// policies see identical goals or scenarios.
pub fn run_eval(
    env_cfg: &EnvConfig,
    opponent: &OpponentKind,
    policy: &mut dyn Policy,
    episodes: usize,
    seeds: &[u64],
) -> Result<EvalReport, HarnessError> {
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &seed in seeds {
        let mut env = TaskEnv::new(env_cfg, opponent, derive_seed(seed, EVAL_STREAM, u64::MAX))?;
        if let Some((state_dim, n_actions)) = policy.dims() {
            check_compatible(&env, state_dim, n_actions)?;
        }
        let mut records = Vec::with_capacity(episodes);
        for i in 0..episodes {
            records.push(rollout(&mut env, policy, derive_seed(seed, EVAL_STREAM, i as u64))?.0);
        }
        for (k, v) in summarize(&records)? {
            per_metric.entry(k).or_default().push(v);
        }
    }
    Ok(EvalReport {
        env: env_cfg.name().into(),
        episodes_per_seed: episodes,
        seeds: seeds.to_vec(),
        metrics: per_metric
            .into_iter()
            .map(|(k, v)| (k, MetricSummary::of(&v)))
            .collect(),
    })
}

/// Checks the policy's catalog sizes against the environment's.
pub fn check_compatible(env: &TaskEnv, state_dim: usize, n_actions: usize) -> Result<(), HarnessError> {
    if env.state_dim() != state_dim || env.n_actions() != n_actions {
        return Err(HarnessError::Incompatible(format!(
            "policy expects state {state_dim} / actions {n_actions}, environment has {} / {}",
            env.state_dim(),
            env.n_actions()
        )));
    }
    Ok(())
}
