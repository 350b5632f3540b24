//! Shared fixtures for the criterion benches.

use oppa_core::domain::{EnvConfig, NegotiationConfig};
use oppa_core::harness::{build_agent, ExperimentConfig, OpponentKind, TaskEnv, Variant};
use oppa_core::policy::OppaAgent;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn negotiation_config() -> EnvConfig {
    EnvConfig::Negotiation(NegotiationConfig::default())
}

/// Untrained agent and a matching environment for `env`.
pub fn agent_and_env(env: EnvConfig, variant: Variant) -> (OppaAgent, TaskEnv) {
    let cfg = ExperimentConfig {
        env,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let agent = build_agent(&cfg, variant, 0, &mut rng).expect("agent builds");
    let task = TaskEnv::new(&cfg.env, &OpponentKind::default(), 0).expect("env builds");
    (agent, task)
}
