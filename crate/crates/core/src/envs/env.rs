use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    enumerate_actions, ActKind, ActionCatalog, Actor, CoopState, CooperativeConfig, DialogueAct, DialogueState,
    EnvConfig, NegotiationConfig, ScenarioSpace,
};

use super::agents::Negotiator;
use super::cooperative::{coop_new, AgendaSimulator};
use super::metrics::{Outcome, SessionRecord, SessionStatus};
use super::negotiation::{GameStatus, NegotiationGame};
use super::EnvError;

/// What the target agent sees after one of its moves.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// The opposite agent's reply, as an index into the opposite catalog.
    pub opposite: Option<usize>,
    pub reward: f64,
    pub done: bool,
}

/// A dialogue seen from the target agent, with the opposite agent built in.
pub trait DialogueEnv {
    fn config(&self) -> &EnvConfig;
    fn target_catalog(&self) -> &ActionCatalog;
    fn opposite_catalog(&self) -> &ActionCatalog;
    /// Start a fresh episode; the opposite agent makes the opening move.
    fn reset(&mut self, seed: u64) -> Result<(), EnvError>;
    fn state(&self) -> DialogueState;
    fn legal_mask(&self) -> Vec<bool>;
    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;
    fn record(&self) -> SessionRecord;
    /// The opposite agent's most recent act, as an opposite-catalog index.
    fn last_opposite(&self) -> Option<usize>;
}

/// Reward shaping for the cooperative task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoopReward {
    pub per_turn: f64,
    pub success: f64,
}

impl CoopReward {
    pub fn for_config(config: &CooperativeConfig) -> Self {
        Self {
            per_turn: -1.0,
            success: 2.0 * f64::from(config.patience),
        }
    }
}

/// System agent against the agenda-based user simulator.
pub struct CoopEnv {
    config: EnvConfig,
    coop: CooperativeConfig,
    system: ActionCatalog,
    user: ActionCatalog,
    pub reward: CoopReward,
    sim: Option<AgendaSimulator>,
    state: CoopState,
    acts: Vec<DialogueAct>,
    informed: BTreeSet<String>,
    status: SessionStatus,
}

impl CoopEnv {
    pub fn new(config: CooperativeConfig) -> Result<Self, EnvError> {
        let env = EnvConfig::Cooperative(config.clone());
        Ok(Self {
            system: enumerate_actions(&env, Actor::Target)?,
            user: enumerate_actions(&env, Actor::Opposite)?,
            reward: CoopReward::for_config(&config),
            config: env,
            coop: config,
            sim: None,
            state: CoopState::default(),
            acts: Vec::new(),
            informed: BTreeSet::new(),
            status: SessionStatus::Running,
        })
    }

    pub fn simulator(&self) -> Option<&AgendaSimulator> {
        self.sim.as_ref()
    }

    pub fn last_user_act(&self) -> Option<&DialogueAct> {
        self.acts.iter().rev().find(|a| a.actor == Actor::Opposite)
    }

    fn observe_user(&mut self, act: DialogueAct) {
        match (act.kind, act.slot_name()) {
            (ActKind::Inform, Some(slot)) => {
                let value = match &act.args {
                    crate::domain::ActArgs::Slots(s) => s[0].1.clone(),
                    _ => String::new(),
                };
                self.state.belief.insert(slot.to_string(), value);
            }
            (ActKind::Request, Some(slot)) => {
                self.state.requested.insert(slot.to_string());
            }
            _ => {}
        }
        self.state.last_user_act = self.user.index_of(&act);
        self.acts.push(act);
    }
}

impl DialogueEnv for CoopEnv {
    fn config(&self) -> &EnvConfig {
        &self.config
    }

    fn target_catalog(&self) -> &ActionCatalog {
        &self.system
    }

    fn opposite_catalog(&self) -> &ActionCatalog {
        &self.user
    }

    fn reset(&mut self, seed: u64) -> Result<(), EnvError> {
        let (sim, first) = coop_new(seed, &self.coop)?;
        self.sim = Some(sim);
        self.state = CoopState::default();
        self.acts.clear();
        self.informed.clear();
        self.status = SessionStatus::Running;
        self.observe_user(first);
        Ok(())
    }

    fn state(&self) -> DialogueState {
        DialogueState::Cooperative(self.state.clone())
    }

    fn legal_mask(&self) -> Vec<bool> {
        vec![self.status == SessionStatus::Running; self.system.len()]
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.status != SessionStatus::Running {
            return Err(EnvError::Finished);
        }
        let sim = self.sim.as_mut().ok_or(EnvError::NotStarted)?;
        let act = self
            .system
            .acts()
            .get(action)
            .cloned()
            .ok_or(EnvError::UnknownAction(action))?;
        let turn = sim.respond(&act)?;
        if let (ActKind::Inform, Some(slot)) = (act.kind, act.slot_name()) {
            self.informed.insert(slot.to_string());
            self.state.informed.insert(slot.to_string());
            self.state.requested.remove(slot);
        }
        self.state.offered = sim.offered.iter().cloned().collect();
        self.state.booked = sim.booked.iter().filter(|(_, m)| **m).map(|(d, _)| d.clone()).collect();
        self.state.turn += 1;
        self.acts.push(act);
        self.observe_user(turn.act);
        let mut reward = self.reward.per_turn;
        if turn.done {
            self.status = if turn.success {
                reward += self.reward.success;
                SessionStatus::Success
            } else {
                SessionStatus::Failure
            };
        }
        Ok(StepResult {
            opposite: self.state.last_user_act,
            reward,
            done: turn.done,
        })
    }

    fn record(&self) -> SessionRecord {
        let (goal, booked) = match &self.sim {
            Some(s) => (s.goal.clone(), s.booked.clone()),
            None => (crate::domain::Goal { domains: vec![] }, Default::default()),
        };
        SessionRecord {
            turns: SessionRecord::target_turns(&self.acts),
            acts: self.acts.clone(),
            status: self.status,
            outcome: Outcome::Cooperative {
                goal,
                informed: self.informed.clone(),
                booked,
            },
        }
    }

    fn last_opposite(&self) -> Option<usize> {
        self.state.last_user_act
    }
}

/// Target negotiator against a scripted or learned counterpart.
pub struct NegoEnv {
    config: EnvConfig,
    nego: NegotiationConfig,
    space: ScenarioSpace,
    target: ActionCatalog,
    opposite: ActionCatalog,
    counterpart: Box<dyn Negotiator>,
    pub first_mover: Actor,
    game: Option<NegotiationGame>,
    last_opposite: Option<usize>,
}

impl NegoEnv {
    pub fn new(config: NegotiationConfig, counterpart: Box<dyn Negotiator>) -> Result<Self, EnvError> {
        let env = EnvConfig::Negotiation(config.clone());
        Ok(Self {
            space: ScenarioSpace::new(&config)?,
            target: enumerate_actions(&env, Actor::Target)?,
            opposite: enumerate_actions(&env, Actor::Opposite)?,
            config: env,
            nego: config,
            counterpart,
            first_mover: Actor::Opposite,
            game: None,
            last_opposite: None,
        })
    }

    pub fn game(&self) -> Option<&NegotiationGame> {
        self.game.as_ref()
    }

    /// Start from a fixed game instead of a sampled one.
    pub fn reset_with(&mut self, game: NegotiationGame) -> Result<(), EnvError> {
        self.game = Some(game);
        self.last_opposite = None;
        self.counterpart_moves()
    }

    fn counterpart_moves(&mut self) -> Result<(), EnvError> {
        let game = self.game.as_mut().ok_or(EnvError::NotStarted)?;
        if game.is_running() && game.mover == Actor::Opposite {
            let legal = game.legal_mask(self.opposite.acts());
            let i = self
                .counterpart
                .choose(&game.view(Actor::Opposite), &legal, &self.opposite)?;
            game.step(self.opposite.act(i))?;
            self.last_opposite = Some(i);
        }
        Ok(())
    }
}

impl DialogueEnv for NegoEnv {
    fn config(&self) -> &EnvConfig {
        &self.config
    }

    fn target_catalog(&self) -> &ActionCatalog {
        &self.target
    }

    fn opposite_catalog(&self) -> &ActionCatalog {
        &self.opposite
    }

    fn reset(&mut self, seed: u64) -> Result<(), EnvError> {
        let scenario = self.space.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        let game = NegotiationGame::new(scenario, self.nego.clone(), self.first_mover)?;
        self.reset_with(game)
    }

    fn state(&self) -> DialogueState {
        let game = self.game.as_ref().expect("reset before state");
        DialogueState::Negotiation(game.view(Actor::Target))
    }

    fn legal_mask(&self) -> Vec<bool> {
        match &self.game {
            Some(g) if g.is_running() && g.mover == Actor::Target => g.legal_mask(self.target.acts()),
            _ => vec![false; self.target.len()],
        }
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let act = self
            .target
            .acts()
            .get(action)
            .cloned()
            .ok_or(EnvError::UnknownAction(action))?;
        self.game.as_mut().ok_or(EnvError::NotStarted)?.step(&act)?;
        let before = self.game.as_ref().map_or(0, |g| g.transcript.len());
        self.counterpart_moves()?;
        let game = self.game.as_ref().expect("started");
        let replied = game.transcript.len() > before;
        let done = !game.is_running();
        Ok(StepResult {
            opposite: if replied { self.last_opposite } else { None },
            reward: if done {
                f64::from(game.score(Actor::Target)?)
            } else {
                0.0
            },
            done,
        })
    }

    fn record(&self) -> SessionRecord {
        let game = self.game.as_ref().expect("reset before record");
        negotiation_record(game)
    }

    fn last_opposite(&self) -> Option<usize> {
        self.last_opposite
    }
}

/// Session record of a negotiation game in any state.
pub fn negotiation_record(game: &NegotiationGame) -> SessionRecord {
    let status = match game.status {
        GameStatus::Running => SessionStatus::Running,
        GameStatus::Agreed => SessionStatus::Agreed,
        GameStatus::NoDeal => SessionStatus::NoDeal,
        GameStatus::Timeout => SessionStatus::Timeout,
    };
    SessionRecord {
        turns: SessionRecord::target_turns(&game.transcript),
        acts: game.transcript.clone(),
        status,
        outcome: Outcome::Negotiation {
            scenario: game.scenario.clone(),
            allocation: game.allocation,
            score_target: game.score(Actor::Target).unwrap_or(0),
            score_opposite: game.score(Actor::Opposite).unwrap_or(0),
        },
    }
}
