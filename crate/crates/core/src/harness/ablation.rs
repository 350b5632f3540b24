use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::EnvConfig;

use super::config::ExperimentConfig;
use super::crossplay::{run_crossplay, CrossplayResult, PolicyNegotiator};
use super::eval::{run_eval, EvalReport, MetricSummary};
use super::train::{run_train, Variant};
use super::HarnessError;

/// Greedy-evaluation report per variant, all trained on the same seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub env: String,
    pub seeds: Vec<u64>,
    pub variants: Vec<(Variant, EvalReport)>,
}

impl AblationReport {
    pub fn mean(&self, variant: Variant, metric: &str) -> Option<f64> {
        self.variants
            .iter()
            .find(|(v, _)| *v == variant)
            .and_then(|(_, r)| r.mean(metric))
    }
}

/// Trains every seed of `variant` and evaluates each on its own evaluation stream.
pub fn evaluate_variant(cfg: &ExperimentConfig, variant: Variant) -> Result<EvalReport, HarnessError> {
    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &seed in &cfg.seeds {
        let mut out = run_train(cfg, variant, seed)?;
        let r = run_eval(&cfg.env, &cfg.opponent, &mut out.policy, cfg.eval_episodes, &[seed])?;
        for (k, m) in r.metrics {
            per_metric.entry(k).or_default().push(m.mean);
        }
    }
    Ok(EvalReport {
        env: cfg.env.name().into(),
        episodes_per_seed: cfg.eval_episodes,
        seeds: cfg.seeds.clone(),
        metrics: per_metric
            .into_iter()
            .map(|(k, v)| (k, MetricSummary::of(&v)))
            .collect(),
    })
}

/// The requested variants in canonical order, sharing seeds and environments.
pub fn run_ablations(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<AblationReport, HarnessError> {
    cfg.validate()?;
    let mut order: Vec<Variant> = variants.to_vec();
    order.sort();
    order.dedup();
    let mut out = Vec::with_capacity(order.len());
    for v in order {
        out.push((v, evaluate_variant(cfg, v)?));
    }
    Ok(AblationReport {
        env: cfg.env.name().into(),
        seeds: cfg.seeds.clone(),
        variants: out,
    })
}

/// Per-seed cross-play of two variants trained under identical seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossplayBattery {
    pub a: Variant,
    pub b: Variant,
    pub per_seed: Vec<(u64, CrossplayResult)>,
}

impl CrossplayBattery {
    /// Seed-averaged `(all_a, all_b)`.
    pub fn mean_all(&self) -> (f64, f64) {
        let n = self.per_seed.len().max(1) as f64;
        let a = self.per_seed.iter().map(|(_, r)| r.all.0).sum::<f64>() / n;
        let b = self.per_seed.iter().map(|(_, r)| r.all.1).sum::<f64>() / n;
        (a, b)
    }

    /// Seed-averaged `(agreed_a, agreed_b)`.
    pub fn mean_agreed(&self) -> (f64, f64) {
        let n = self.per_seed.len().max(1) as f64;
        let a = self.per_seed.iter().map(|(_, r)| r.agreed.0).sum::<f64>() / n;
        let b = self.per_seed.iter().map(|(_, r)| r.agreed.1).sum::<f64>() / n;
        (a, b)
    }
}

pub fn run_crossplay_battery(
    cfg: &ExperimentConfig,
    a: Variant,
    b: Variant,
    episodes: usize,
) -> Result<CrossplayBattery, HarnessError> {
    let EnvConfig::Negotiation(nc) = &cfg.env else {
        return Err(HarnessError::InvalidConfig(
            "cross-play needs the negotiation environment".into(),
        ));
    };
    let mut per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let pa = run_train(cfg, a, seed)?.policy;
        let pb = run_train(cfg, b, seed)?.policy;
        let mut na = PolicyNegotiator::new(a.label(), pa, nc)?;
        let mut nb = PolicyNegotiator::new(b.label(), pb, nc)?;
        per_seed.push((seed, run_crossplay(nc, &mut na, &mut nb, episodes, seed)?));
    }
    Ok(CrossplayBattery { a, b, per_seed })
}
