use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{sample_goal, ActKind, Actor, CooperativeConfig, DialogueAct, Goal, ANY_VALUE};

use super::EnvError;

/// A pending user intent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "intent", rename_all = "snake_case")]
pub enum AgendaItem {
    Inform {
        domain: String,
        slot: String,
        value: String,
    },
    Request {
        domain: String,
        slot: String,
    },
    Book {
        domain: String,
    },
}

impl AgendaItem {
    fn user_act(&self) -> DialogueAct {
        match self {
            AgendaItem::Inform { domain, slot, value } => {
                DialogueAct::slot(Actor::Opposite, ActKind::Inform, &format!("{domain}.{slot}"), value)
            }
            AgendaItem::Request { domain, slot } => DialogueAct::slot(
                Actor::Opposite,
                ActKind::Request,
                &format!("{domain}.{slot}"),
                ANY_VALUE,
            ),
            AgendaItem::Book { domain } => DialogueAct::slot(Actor::Opposite, ActKind::Book, domain, ANY_VALUE),
        }
    }
}

/// Outcome of one user turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserTurn {
    pub act: DialogueAct,
    pub done: bool,
    pub success: bool,
}

/// Rule-driven user with a stack of pending intents derived from its goal.
///
/// Per domain the agenda holds the constraint informs, then the requests,
/// then the booking; domains follow goal order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgendaSimulator {
    pub goal: Goal,
    pub agenda: VecDeque<AgendaItem>,
    /// Target turns left before the user gives up.
    pub patience: u32,
    /// Constraint values the user has told the system, qualified.
    pub told: BTreeMap<String, String>,
    pub offered: Vec<String>,
    /// Domain → whether its booking satisfied every constraint.
    pub booked: BTreeMap<String, bool>,
    pub finished: bool,
}

/// Sample a goal, build its agenda and voice the first intent.
pub fn coop_new(seed: u64, config: &CooperativeConfig) -> Result<(AgendaSimulator, DialogueAct), EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal = sample_goal(&mut rng, config)?;
    let mut sim = AgendaSimulator::new(goal, config.patience);
    let first = sim.voice_next().act;
    Ok((sim, first))
}

impl AgendaSimulator {
    pub fn new(goal: Goal, patience: u32) -> Self {
        let mut agenda = VecDeque::new();
        for d in &goal.domains {
            for (slot, value) in &d.constraints {
                agenda.push_back(AgendaItem::Inform {
                    domain: d.domain.clone(),
                    slot: slot.clone(),
                    value: value.clone(),
                });
            }
            for slot in &d.requests {
                agenda.push_back(AgendaItem::Request {
                    domain: d.domain.clone(),
                    slot: slot.clone(),
                });
            }
            if d.book {
                agenda.push_back(AgendaItem::Book {
                    domain: d.domain.clone(),
                });
            }
        }
        Self {
            goal,
            agenda,
            patience,
            told: BTreeMap::new(),
            offered: Vec::new(),
            booked: BTreeMap::new(),
            finished: false,
        }
    }

    fn constraints_known(&self, domain: &str) -> bool {
        self.goal.domain(domain).is_some_and(|d| {
            d.constraints
                .iter()
                .all(|(s, _)| self.told.contains_key(&format!("{domain}.{s}")))
        })
    }

    fn pop_inform(&mut self, domain: &str, slot: &str) -> Option<AgendaItem> {
        let pos = self
            .agenda
            .iter()
            .position(|it| matches!(it, AgendaItem::Inform { domain: d, slot: s, .. } if d == domain && s == slot))?;
        self.agenda.remove(pos)
    }

    fn tell(&mut self, item: &AgendaItem) {
        if let AgendaItem::Inform { domain, slot, value } = item {
            self.told.insert(format!("{domain}.{slot}"), value.clone());
        }
    }

    /// Voice the top of the agenda, or say bye once it is empty.
    fn voice_next(&mut self) -> UserTurn {
        match self.agenda.front().cloned() {
            None => {
                self.finished = true;
                UserTurn {
                    act: DialogueAct::bare(Actor::Opposite, ActKind::Bye),
                    done: true,
                    success: true,
                }
            }
            Some(item) => {
                if matches!(item, AgendaItem::Inform { .. }) {
                    self.agenda.pop_front();
                    self.tell(&item);
                }
                UserTurn {
                    act: item.user_act(),
                    done: false,
                    success: false,
                }
            }
        }
    }

    /// Apply the rule table to one system act and produce the user's reply.
    pub fn respond(&mut self, system: &DialogueAct) -> Result<UserTurn, EnvError> {
        if self.finished {
            return Err(EnvError::Finished);
        }
        self.patience = self.patience.saturating_sub(1);
        let target = system.slot_name().map(str::to_string);
        let mut direct: Option<AgendaItem> = None;
        match (system.kind, target) {
            (ActKind::Bye, _) => {
                self.finished = true;
                return Ok(UserTurn {
                    act: DialogueAct::bare(Actor::Opposite, ActKind::Bye),
                    done: true,
                    success: false,
                });
            }
            (ActKind::Request, Some(q)) => {
                if let Some((d, s)) = q.split_once('.') {
                    direct = self.pop_inform(d, s);
                }
            }
            (ActKind::Offer, Some(d)) => {
                if self.constraints_known(&d) && !self.offered.contains(&d) {
                    self.offered.push(d);
                }
            }
            (ActKind::Inform, Some(q)) => {
                if let Some((d, s)) = q.split_once('.') {
                    if self.offered.iter().any(|o| o == d) {
                        self.agenda.retain(
                            |it| !matches!(it, AgendaItem::Request { domain, slot } if domain == d && slot == s),
                        );
                    }
                }
            }
            (ActKind::Book, Some(d)) if self.goal.domain(&d).is_some() => {
                let matched = self.constraints_known(&d);
                self.booked.insert(d.clone(), matched);
                if matched {
                    self.agenda
                        .retain(|it| !matches!(it, AgendaItem::Book { domain } if *domain == d));
                }
            }
            _ => {}
        }
        let turn = match direct {
            Some(item) => {
                self.tell(&item);
                UserTurn {
                    act: item.user_act(),
                    done: false,
                    success: false,
                }
            }
            None => self.voice_next(),
        };
        if !turn.done && self.patience == 0 {
            self.finished = true;
            return Ok(UserTurn {
                act: DialogueAct::bare(Actor::Opposite, ActKind::Bye),
                done: true,
                success: false,
            });
        }
        Ok(turn)
    }
}

pub fn coop_user_step(sim: &mut AgendaSimulator, system_act: &DialogueAct) -> Result<UserTurn, EnvError> {
    sim.respond(system_act)
}
