use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oppa_core::domain::EnvConfig;
use oppa_core::harness::{
    build_agent, derive_seed, load_policy, metric_rows, render_table, run_ablations, run_crossplay_battery, run_eval,
    run_pretrain, run_train, save_policy, write_csv, AgentMeta, EvalReport, ExperimentConfig, TrainedPolicy, Variant,
    AGENT_STREAM,
};
use oppa_core::play::ServedAgent;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ExperimentConfig::from_json(&text)?)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

/// Replaces the configured seed list when a seed is given on the command line.
pub fn with_seed(mut cfg: ExperimentConfig, seed: Option<u64>) -> ExperimentConfig {
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    cfg
}

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out.map_or_else(|| PathBuf::from(&cfg.out_dir), Path::to_path_buf);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn checkpoint_dir(out: &Path, variant: Variant, seed: u64) -> PathBuf {
    out.join(format!(
        "{}-seed{seed}",
        serde_json::to_value(variant)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    ))
}

/// Pretraining only; saves the pretrained agent per seed.
pub fn pretrain(cfg: &ExperimentConfig, variant: Variant, out: Option<&Path>) -> Result<String> {
    if cfg.pretrain.is_none() {
        bail!("config has no pretrain section");
    }
    if variant == Variant::Reinforce {
        bail!("pretrain saves Q-learning agents; train REINFORCE with a pretrain section instead");
    }
    let dir = out_dir(cfg, out)?;
    let mut lines = Vec::new();
    for &seed in &cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, AGENT_STREAM, 0));
        let mut agent = build_agent(cfg, variant, seed, &mut rng)?;
        let report = run_pretrain(cfg, &mut agent, &mut rng)?;
        let policy = TrainedPolicy::Oppa(agent);
        let meta = AgentMeta::describe(cfg, variant, &policy)?;
        save_policy(&policy, &meta, &checkpoint_dir(&dir, variant, seed))?;
        lines.push(format!("seed {seed}: {}", serde_json::to_string(&report)?));
    }
    Ok(lines.join("\n"))
}

pub fn train(cfg: &ExperimentConfig, variant: Variant, out: Option<&Path>) -> Result<String> {
    let dir = out_dir(cfg, out)?;
    let mut lines = Vec::new();
    for &seed in &cfg.seeds {
        let outcome = run_train(cfg, variant, seed)?;
        let ckpt = checkpoint_dir(&dir, variant, seed);
        let meta = AgentMeta::describe(cfg, variant, &outcome.policy)?;
        save_policy(&outcome.policy, &meta, &ckpt)?;
        write_csv(&ckpt.join("curve.csv"), &outcome.curve)?;
        let last = outcome.curve.last().map_or(0.0, |r| r.metric);
        lines.push(format!(
            "seed {seed}: {} at last snapshot {last:.2} -> {}",
            variant.label(),
            ckpt.display()
        ));
    }
    Ok(lines.join("\n"))
}

pub fn eval(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<EvalReport> {
    let (mut policy, meta) = load_policy(checkpoint)?;
    if meta.env != cfg.env {
        bail!("checkpoint was trained on a different environment config");
    }
    Ok(run_eval(
        &cfg.env,
        &cfg.opponent,
        &mut policy,
        cfg.eval_episodes,
        &cfg.seeds,
    )?)
}

pub fn crossplay(
    cfg: &ExperimentConfig,
    a: Variant,
    b: Variant,
    episodes: usize,
    out: Option<&Path>,
) -> Result<String> {
    let dir = out_dir(cfg, out)?;
    let battery = run_crossplay_battery(cfg, a, b, episodes)?;
    let rows: Vec<_> = battery.per_seed.iter().flat_map(|(_, r)| r.rows()).collect();
    write_csv(&dir.join("crossplay.csv"), &rows)?;
    let (all_a, all_b) = battery.mean_all();
    let (ag_a, ag_b) = battery.mean_agreed();
    Ok(format!(
        "{} vs {}: all {all_a:.2} vs. {all_b:.2}, agreed {ag_a:.2} vs. {ag_b:.2} over {} seeds",
        a.label(),
        b.label(),
        battery.per_seed.len()
    ))
}

pub fn ablate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<String> {
    let dir = out_dir(cfg, out)?;
    let report = run_ablations(cfg, &Variant::ALL)?;
    write_csv(&dir.join("ablation.csv"), &metric_rows(&report.variants))?;
    fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(render_table(&report.variants))
}

/// Loads a checkpoint for serving; it must be a negotiation policy.
pub fn load_served(dir: &Path) -> Result<ServedAgent> {
    let (policy, meta) = load_policy(dir).with_context(|| format!("loading {}", dir.display()))?;
    let EnvConfig::Negotiation(cfg) = meta.env else {
        bail!("{} is not a negotiation checkpoint", dir.display());
    };
    Ok(ServedAgent::new(policy, cfg)?)
}
