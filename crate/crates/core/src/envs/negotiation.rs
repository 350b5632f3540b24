use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    total_value, ActKind, Actor, DialogueAct, ItemCounts, NegoState, NegotiationConfig, Scenario, ScenarioSpace,
};

use super::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameStatus {
    Running,
    Agreed,
    NoDeal,
    Timeout,
}

/// Two agents dividing an item pool by alternating proposals.
///
/// Agent `Target` owns `values_a`, agent `Opposite` owns `values_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegotiationGame {
    pub scenario: Scenario,
    pub config: NegotiationConfig,
    pub status: GameStatus,
    /// Proposer and the counts it claimed for itself.
    pub standing: Option<(Actor, ItemCounts)>,
    pub mover: Actor,
    pub first_mover: Actor,
    pub transcript: Vec<DialogueAct>,
    /// Final allocation to (target, opposite) once agreed.
    pub allocation: Option<(ItemCounts, ItemCounts)>,
}

/// Sample a scenario uniformly under `config` and start a game with the opposite agent moving first.
pub fn nego_new(seed: u64, config: &NegotiationConfig) -> Result<NegotiationGame, EnvError> {
    let space = ScenarioSpace::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NegotiationGame::new(space.sample(&mut rng), config.clone(), Actor::Opposite)
}

impl NegotiationGame {
    pub fn new(scenario: Scenario, config: NegotiationConfig, first_mover: Actor) -> Result<Self, EnvError> {
        scenario.validate(&config)?;
        Ok(Self {
            scenario,
            config,
            status: GameStatus::Running,
            standing: None,
            mover: first_mover,
            first_mover,
            transcript: Vec::new(),
            allocation: None,
        })
    }

    pub fn is_running(&self) -> bool {
        self.status == GameStatus::Running
    }

    pub fn turns(&self) -> u32 {
        self.transcript.len() as u32
    }

    /// Why `act` may not be played by the current mover, if it may not.
    pub fn check_legal(&self, act: &DialogueAct) -> Result<(), EnvError> {
        if !self.is_running() {
            return Err(EnvError::Finished);
        }
        if act.actor != self.mover {
            return Err(EnvError::NotYourTurn);
        }
        match act.kind {
            ActKind::Propose => {
                let claim = act
                    .claim()
                    .ok_or_else(|| EnvError::IllegalAct("propose without counts".into()))?;
                for ((c, avail), name) in claim
                    .iter()
                    .zip(&self.scenario.item_counts)
                    .zip(crate::domain::ITEM_NAMES)
                {
                    if c > avail {
                        return Err(EnvError::IllegalAct(format!(
                            "claims {c} {name}s but only {avail} available"
                        )));
                    }
                }
                Ok(())
            }
            ActKind::Agree => match self.standing {
                Some((who, _)) if who != act.actor => Ok(()),
                Some(_) => Err(EnvError::IllegalAct("cannot agree to own proposal".into())),
                None => Err(EnvError::IllegalAct("no standing proposal to agree to".into())),
            },
            ActKind::Disagree | ActKind::End | ActKind::Greet => Ok(()),
            k => Err(EnvError::IllegalAct(format!("{} is not a negotiation act", k.name()))),
        }
    }

    /// Apply the mover's act; returns whether the game is finished.
    pub fn step(&mut self, act: &DialogueAct) -> Result<bool, EnvError> {
        self.check_legal(act)?;
        match act.kind {
            ActKind::Propose => self.standing = Some((act.actor, act.claim().expect("checked"))),
            ActKind::Agree => {
                let (who, claim) = self.standing.expect("checked");
                let mut rest = self.scenario.item_counts;
                for (r, c) in rest.iter_mut().zip(claim) {
                    *r -= c;
                }
                self.allocation = Some(match who {
                    Actor::Target => (claim, rest),
                    Actor::Opposite => (rest, claim),
                });
                self.status = GameStatus::Agreed;
            }
            ActKind::Disagree => self.standing = None,
            ActKind::End => self.status = GameStatus::NoDeal,
            _ => {}
        }
        self.transcript.push(act.clone());
        if self.is_running() && self.turns() >= self.config.max_turns {
            self.status = GameStatus::Timeout;
        }
        self.mover = self.mover.other();
        Ok(!self.is_running())
    }

    pub fn allocation_of(&self, agent: Actor) -> Option<ItemCounts> {
        self.allocation.map(|(t, o)| match agent {
            Actor::Target => t,
            Actor::Opposite => o,
        })
    }

    /// Σ allocation·value for `agent`; zero unless agreed.
    pub fn score(&self, agent: Actor) -> Result<u32, EnvError> {
        if self.is_running() {
            return Err(EnvError::StillRunning);
        }
        Ok(self
            .allocation_of(agent)
            .map_or(0, |a| total_value(&a, self.scenario.values(agent))))
    }

    /// `agent`'s view: own values, recent acts, standing proposal, turn.
    pub fn view(&self, agent: Actor) -> NegoState {
        let k = self.config.history_len;
        let skip = self.transcript.len().saturating_sub(k);
        NegoState {
            perspective: agent,
            scenario: self.scenario.clone(),
            history: self.transcript[skip..].to_vec(),
            standing: self.standing,
            turn: self.turns(),
        }
    }

    /// Legal-act mask for the current mover over a negotiation catalog.
    pub fn legal_mask(&self, acts: &[DialogueAct]) -> Vec<bool> {
        acts.iter()
            .map(|a| self.check_legal(&a.with_actor(self.mover)).is_ok())
            .collect()
    }
}

pub fn nego_score(game: &NegotiationGame, agent: Actor) -> Result<u32, EnvError> {
    game.score(agent)
}

/// Iterate every division of `counts` as the share of agent A.
pub fn divisions(counts: &ItemCounts) -> impl Iterator<Item = ItemCounts> + '_ {
    (0..=counts[0]).flat_map(move |a| (0..=counts[1]).flat_map(move |b| (0..=counts[2]).map(move |c| [a, b, c])))
}

/// No division gives both agents at least as much with one strictly more.
pub fn pareto_optimal(scenario: &Scenario, score_a: u32, score_b: u32) -> bool {
    !divisions(&scenario.item_counts).any(|share| {
        let mut rest = scenario.item_counts;
        for (r, s) in rest.iter_mut().zip(share) {
            *r -= s;
        }
        let a = total_value(&share, &scenario.values_a);
        let b = total_value(&rest, &scenario.values_b);
        a >= score_a && b >= score_b && (a > score_a || b > score_b)
    })
}
