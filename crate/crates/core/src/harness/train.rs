use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::policy::{
    pretrain, pretrain_policy_net, EnvDims, OppaAgent, PolicyNet, PretrainReport, ReinforceAgent, ReplayBuffer,
};

use super::config::ExperimentConfig;
use super::corpus::generate_corpus;
use super::eval::{run_eval, EvalReport};
use super::task::{Policy, TaskEnv};
use super::{derive_seed, HarnessError};

pub const AGENT_STREAM: u64 = 0;
pub const TRAIN_STREAM: u64 = 1;
pub const SNAPSHOT_STREAM: u64 = 4;
pub const OPPONENT_STREAM: u64 = 5;

/// The learners compared in the ablation battery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Oppa,
    OppaNoReg,
    Dqn,
    Reinforce,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Oppa, Variant::OppaNoReg, Variant::Dqn, Variant::Reinforce];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Oppa => "OPPA",
            Variant::OppaNoReg => "OPPA w/o A",
            Variant::Dqn => "OPPA w/o OBE (DQN)",
            Variant::Reinforce => "REINFORCE",
        }
    }

    /// `(use_obe, use_action_reg)` for the Q-learning variants.
    pub fn flags(self) -> Option<(bool, bool)> {
        match self {
            Variant::Oppa => Some((true, true)),
            Variant::OppaNoReg => Some((true, false)),
            Variant::Dqn => Some((false, false)),
            Variant::Reinforce => None,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|v| serde_json::to_value(v).ok().and_then(|j| j.as_str().map(|s| s == name)) == Some(true))
    }
}

/// One learning-curve snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    /// Success rate (cooperative) or average score (negotiation) of the greedy policy.
    pub metric: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// Mean training reward since the previous snapshot.
    pub mean_reward: f64,
}

/// A trained policy of either family.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum TrainedPolicy {
    Oppa(OppaAgent),
    Reinforce(PolicyNet),
}

impl TrainedPolicy {
    pub fn greedy(&self, state: &[f64], mask: Option<&[bool]>) -> Result<usize, crate::policy::PolicyError> {
        match self {
            TrainedPolicy::Oppa(a) => a.greedy_action(state, mask),
            TrainedPolicy::Reinforce(p) => p.greedy_action(state, mask),
        }
    }
}

impl Policy for TrainedPolicy {
    fn choose(&mut self, env: &TaskEnv, state: &[f64], mask: Option<&[bool]>) -> Result<usize, HarnessError> {
        match self {
            TrainedPolicy::Oppa(a) => a.choose(env, state, mask),
            TrainedPolicy::Reinforce(p) => p.choose(env, state, mask),
        }
    }

    fn dims(&self) -> Option<(usize, usize)> {
        match self {
            TrainedPolicy::Oppa(a) => Policy::dims(a),
            TrainedPolicy::Reinforce(p) => Policy::dims(p),
        }
    }
}

pub struct TrainOutcome {
    pub policy: TrainedPolicy,
    pub curve: Vec<CurveRow>,
    pub pretrain: Option<PretrainReport>,
}

pub fn primary_metric(cfg: &ExperimentConfig) -> &'static str {
    match cfg.env {
        crate::domain::EnvConfig::Cooperative(_) => "success",
        crate::domain::EnvConfig::Negotiation(_) => "score_all",
    }
}

fn env_for(cfg: &ExperimentConfig, seed: u64) -> Result<TaskEnv, HarnessError> {
    TaskEnv::new(&cfg.env, &cfg.opponent, derive_seed(seed, OPPONENT_STREAM, 0))
}

/// Fresh Q-learning agent for `variant`; Q parameters depend only on the seed.
pub fn build_agent(
    cfg: &ExperimentConfig,
    variant: Variant,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<OppaAgent, HarnessError> {
    let (use_obe, use_action_reg) = variant
        .flags()
        .ok_or_else(|| HarnessError::InvalidConfig(format!("{} is not a Q-learning variant", variant.label())))?;
    let env = env_for(cfg, seed)?;
    let mut training = cfg.training.clone();
    training.use_obe = use_obe;
    training.use_action_reg = use_action_reg;
    training.seed = seed;
    Ok(OppaAgent::new(EnvDims::of(&env), training, rng)?)
}

/// Corpus generation plus supervised/imitation pretraining of `agent`.
pub fn run_pretrain(
    cfg: &ExperimentConfig,
    agent: &mut OppaAgent,
    rng: &mut ChaCha8Rng,
) -> Result<PretrainReport, HarnessError> {
    let pcfg = cfg.pretrain.clone().unwrap_or_default();
    let corpus = generate_corpus(&cfg.env, &cfg.opponent, &cfg.corpus)?;
    Ok(pretrain(agent, &corpus, &pcfg, rng)?)
}

fn snapshot(cfg: &ExperimentConfig, policy: &mut dyn Policy, seed: u64) -> Result<EvalReport, HarnessError> {
    run_eval(
        &cfg.env,
        &cfg.opponent,
        policy,
        cfg.snapshot_episodes,
        &[derive_seed(seed, SNAPSHOT_STREAM, 0)],
    )
}

/// Pretraining (when configured) and RL training of one variant under one seed.
pub fn run_train(cfg: &ExperimentConfig, variant: Variant, seed: u64) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, AGENT_STREAM, 0));
    match variant {
        Variant::Reinforce => train_reinforce(cfg, seed, &mut rng),
        _ => {
            let mut agent = build_agent(cfg, variant, seed, &mut rng)?;
            let report = match cfg.pretrain {
                Some(_) => Some(run_pretrain(cfg, &mut agent, &mut rng)?),
                None => None,
            };
            let (agent, curve) = train_agent(cfg, agent, seed, &mut rng)?;
            Ok(TrainOutcome {
                policy: TrainedPolicy::Oppa(agent),
                curve,
                pretrain: report,
            })
        }
    }
}

/// RL fine-tuning of an existing agent, with snapshots every `snapshot_every` episodes.
pub fn train_agent(
    cfg: &ExperimentConfig,
    mut agent: OppaAgent,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(OppaAgent, Vec<CurveRow>), HarnessError> {
    let mut env = env_for(cfg, seed)?;
    let mut buf = ReplayBuffer::new(agent.config.buffer_capacity);
    let metric = primary_metric(cfg);
    let mut curve = Vec::new();
    let mut window = 0.0;
    for ep in 0..agent.config.episodes {
        let stats = agent.train_iteration(&mut env, &mut buf, ep, derive_seed(seed, TRAIN_STREAM, ep as u64), rng)?;
        window += stats.total_reward;
        if (ep + 1) % cfg.snapshot_every == 0 {
            let report = snapshot(cfg, &mut agent, seed)?;
            curve.push(CurveRow {
                episode: ep + 1,
                metric: report.mean(metric).unwrap_or(0.0),
                epsilon: stats.epsilon,
                beta: stats.beta,
                mean_reward: window / cfg.snapshot_every as f64,
            });
            window = 0.0;
        }
    }
    Ok((agent, curve))
}

fn train_reinforce(cfg: &ExperimentConfig, seed: u64, rng: &mut ChaCha8Rng) -> Result<TrainOutcome, HarnessError> {
    let mut env = env_for(cfg, seed)?;
    let t = &cfg.training;
    let mut learner = ReinforceAgent::new(
        EnvDims::of(&env),
        t.hidden,
        t.gamma_q,
        cfg.reinforce_lr,
        cfg.reinforce_batch,
        t.activation,
        rng,
    )?;
    let report = match &cfg.pretrain {
        Some(p) => {
            let corpus = generate_corpus(&cfg.env, &cfg.opponent, &cfg.corpus)?;
            Some(pretrain_policy_net(&mut learner.net, &corpus, p, rng)?)
        }
        None => None,
    };
    let metric = primary_metric(cfg);
    let mut curve = Vec::new();
    let mut window = 0.0;
    for ep in 0..t.episodes {
        let trace = learner.train_episode(&mut env, derive_seed(seed, TRAIN_STREAM, ep as u64), rng)?;
        window += trace.rewards.iter().sum::<f64>();
        if (ep + 1) % cfg.snapshot_every == 0 {
            let r = snapshot(cfg, &mut learner.net, seed)?;
            curve.push(CurveRow {
                episode: ep + 1,
                metric: r.mean(metric).unwrap_or(0.0),
                epsilon: 0.0,
                beta: 0.0,
                mean_reward: window / cfg.snapshot_every as f64,
            });
            window = 0.0;
        }
    }
    Ok(TrainOutcome {
        policy: TrainedPolicy::Reinforce(learner.net),
        curve,
        pretrain: report,
    })
}
