use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{Actor, EnvConfig};
use crate::envs::{
    expert_action, AlwaysAgree, CoopEnv, DialogueEnv, NegoEnv, Negotiator, RandomNegotiator, SessionRecord, StepResult,
    ThresholdNegotiator,
};
use crate::policy::{EncodedEnv, OppaAgent, PolicyNet, RlEnv};

use super::config::OpponentKind;
use super::HarnessError;

pub fn build_negotiator(kind: &OpponentKind, seed: u64) -> Box<dyn Negotiator> {
    match kind {
        OpponentKind::Threshold { start, floor } => Box::new(ThresholdNegotiator {
            start: *start,
            floor: *floor,
        }),
        OpponentKind::AlwaysAgree => Box::new(AlwaysAgree),
        OpponentKind::Random => Box::new(RandomNegotiator {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }),
    }
}

/// Either task, encoded for the learner.
pub enum TaskEnv {
    Cooperative(EncodedEnv<CoopEnv>),
    Negotiation(EncodedEnv<NegoEnv>),
}

impl TaskEnv {
    pub fn new(config: &EnvConfig, opponent: &OpponentKind, seed: u64) -> Result<Self, HarnessError> {
        Ok(match config {
            EnvConfig::Cooperative(c) => TaskEnv::Cooperative(EncodedEnv::new(CoopEnv::new(c.clone())?)?),
            EnvConfig::Negotiation(c) => TaskEnv::Negotiation(EncodedEnv::new(NegoEnv::new(
                c.clone(),
                build_negotiator(opponent, seed),
            )?)?),
        })
    }

    pub fn dialogue(&self) -> &dyn DialogueEnv {
        match self {
            TaskEnv::Cooperative(e) => &e.env,
            TaskEnv::Negotiation(e) => &e.env,
        }
    }

    pub fn record(&self) -> SessionRecord {
        self.dialogue().record()
    }

    /// What the scripted expert would do in the current state.
    pub fn expert_action(&self) -> Result<usize, HarnessError> {
        match self {
            TaskEnv::Cooperative(e) => Ok(expert_action(e.env.target_catalog(), e.env.last_user_act())),
            TaskEnv::Negotiation(e) => {
                let game = e.env.game().ok_or(crate::envs::EnvError::NotStarted)?;
                let legal = e.env.legal_mask();
                Ok(ThresholdNegotiator::default().choose(&game.view(Actor::Target), &legal, e.env.target_catalog())?)
            }
        }
    }
}

impl RlEnv for TaskEnv {
    fn n_actions(&self) -> usize {
        match self {
            TaskEnv::Cooperative(e) => e.n_actions(),
            TaskEnv::Negotiation(e) => e.n_actions(),
        }
    }

    fn n_opposite(&self) -> usize {
        match self {
            TaskEnv::Cooperative(e) => e.n_opposite(),
            TaskEnv::Negotiation(e) => e.n_opposite(),
        }
    }

    fn placeholder(&self) -> usize {
        match self {
            TaskEnv::Cooperative(e) => e.placeholder(),
            TaskEnv::Negotiation(e) => e.placeholder(),
        }
    }

    fn state_dim(&self) -> usize {
        match self {
            TaskEnv::Cooperative(e) => e.state_dim(),
            TaskEnv::Negotiation(e) => e.state_dim(),
        }
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>, crate::policy::PolicyError> {
        match self {
            TaskEnv::Cooperative(e) => e.reset(seed),
            TaskEnv::Negotiation(e) => e.reset(seed),
        }
    }

    fn mask(&self) -> Option<Vec<bool>> {
        match self {
            TaskEnv::Cooperative(e) => e.mask(),
            TaskEnv::Negotiation(e) => e.mask(),
        }
    }

    fn step(&mut self, action: usize) -> Result<(Vec<f64>, StepResult), crate::policy::PolicyError> {
        match self {
            TaskEnv::Cooperative(e) => e.step(action),
            TaskEnv::Negotiation(e) => e.step(action),
        }
    }
}

/// Anything that picks target acts during evaluation.
pub trait Policy {
    fn choose(&mut self, env: &TaskEnv, state: &[f64], mask: Option<&[bool]>) -> Result<usize, HarnessError>;

    /// `(state_dim, n_actions)` the policy was built for, if it has fixed sizes.
    fn dims(&self) -> Option<(usize, usize)> {
        None
    }
}

impl Policy for OppaAgent {
    fn choose(&mut self, _env: &TaskEnv, state: &[f64], mask: Option<&[bool]>) -> Result<usize, HarnessError> {
        Ok(self.greedy_action(state, mask)?)
    }

    fn dims(&self) -> Option<(usize, usize)> {
        Some((self.q.net.state_dim, self.q.net.n_actions))
    }
}

impl Policy for PolicyNet {
    fn choose(&mut self, _env: &TaskEnv, state: &[f64], mask: Option<&[bool]>) -> Result<usize, HarnessError> {
        Ok(self.greedy_action(state, mask)?)
    }

    fn dims(&self) -> Option<(usize, usize)> {
        Some((self.mlp.in_dim(), self.n_actions()))
    }
}

/// The scripted expert of the environment.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpertPolicy;

impl Policy for ExpertPolicy {
    fn choose(&mut self, env: &TaskEnv, _state: &[f64], _mask: Option<&[bool]>) -> Result<usize, HarnessError> {
        env.expert_action()
    }
}

/// Uniform over legal acts.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    pub rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn choose(&mut self, env: &TaskEnv, _state: &[f64], mask: Option<&[bool]>) -> Result<usize, HarnessError> {
        let n = env.n_actions();
        let legal: Vec<usize> = (0..n).filter(|i| mask.is_none_or(|m| m[*i])).collect();
        if legal.is_empty() {
            return Err(crate::envs::EnvError::NoLegalAction.into());
        }
        Ok(legal[self.rng.random_range(0..legal.len())])
    }
}
