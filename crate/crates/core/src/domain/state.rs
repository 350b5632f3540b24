use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::act::{Actor, DialogueAct, ItemCounts, NUM_ITEMS};
use super::catalog::enumerate_actions;
use super::config::{CooperativeConfig, EnvConfig, NegotiationConfig};
use super::scenario::{total_value, Scenario};
use super::DomainError;

/// System-side belief in the cooperative environment.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoopState {
    /// Constraint slot (qualified) → value the user has confirmed.
    pub belief: BTreeMap<String, String>,
    /// Request slots the system has informed.
    pub informed: BTreeSet<String>,
    /// Request slots the user asked for and the system has not yet answered.
    pub requested: BTreeSet<String>,
    pub offered: BTreeSet<String>,
    pub booked: BTreeSet<String>,
    /// Index of the last user act in the user catalog.
    pub last_user_act: Option<usize>,
    pub turn: u32,
}

/// One agent's view of a negotiation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NegoState {
    pub perspective: Actor,
    pub scenario: Scenario,
    /// Most recent acts, oldest first, at most `history_len` of them.
    pub history: Vec<DialogueAct>,
    /// Proposer and the counts it claimed for itself.
    pub standing: Option<(Actor, ItemCounts)>,
    pub turn: u32,
}

impl NegoState {
    pub fn new(perspective: Actor, scenario: Scenario) -> Self {
        Self {
            perspective,
            scenario,
            history: Vec::new(),
            standing: None,
            turn: 0,
        }
    }

    pub fn own_values(&self) -> &ItemCounts {
        self.scenario.values(self.perspective)
    }

    /// Items this agent would receive if the standing proposal were accepted.
    pub fn standing_share(&self) -> Option<ItemCounts> {
        self.standing.map(|(who, claim)| {
            if who == self.perspective {
                claim
            } else {
                let mut rest = self.scenario.item_counts;
                for (r, c) in rest.iter_mut().zip(claim) {
                    *r -= c;
                }
                rest
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum DialogueState {
    Cooperative(CoopState),
    Negotiation(NegoState),
}

impl DialogueState {
    pub fn turn(&self) -> u32 {
        match self {
            DialogueState::Cooperative(s) => s.turn,
            DialogueState::Negotiation(s) => s.turn,
        }
    }
}

const HISTORY_SLOT: usize = 5 + 1 + NUM_ITEMS;

/// Fixed-length featurizer for one environment config.
#[derive(Clone, Debug)]
pub struct StateEncoder {
    config: EnvConfig,
    layout: Layout,
    raw_dim: usize,
    state_dim: usize,
}

#[derive(Clone, Debug)]
enum Layout {
    Cooperative {
        constraints: Vec<String>,
        requests: Vec<String>,
        domains: Vec<String>,
        user_acts: usize,
        patience: u32,
    },
    Negotiation,
}

impl StateEncoder {
    pub fn new(config: &EnvConfig) -> Result<Self, DomainError> {
        let (layout, raw_dim) = match config {
            EnvConfig::Cooperative(c) => Self::coop_layout(c)?,
            EnvConfig::Negotiation(c) => (Layout::Negotiation, Self::nego_dim(c)),
        };
        let state_dim = config.state_dim();
        if raw_dim > state_dim {
            return Err(DomainError::StateDimTooSmall {
                features: raw_dim,
                state_dim,
            });
        }
        Ok(Self {
            config: config.clone(),
            layout,
            raw_dim,
            state_dim,
        })
    }

    fn coop_layout(c: &CooperativeConfig) -> Result<(Layout, usize), DomainError> {
        let constraints: Vec<String> = c
            .domains
            .iter()
            .flat_map(|d| d.constraints.iter().map(move |s| d.qualify(&s.name)))
            .collect();
        let requests: Vec<String> = c
            .domains
            .iter()
            .flat_map(|d| d.requests.iter().map(move |r| d.qualify(r)))
            .collect();
        let domains: Vec<String> = c.domains.iter().map(|d| d.name.clone()).collect();
        let user_acts = enumerate_actions(&EnvConfig::Cooperative(c.clone()), Actor::Opposite)?.len();
        let dim = constraints.len() + 2 * requests.len() + 2 * domains.len() + user_acts + 1;
        Ok((
            Layout::Cooperative {
                constraints,
                requests,
                domains,
                user_acts,
                patience: c.patience.max(1),
            },
            dim,
        ))
    }

    fn nego_dim(c: &NegotiationConfig) -> usize {
        // counts, own values, history, turn, standing share, standing flags, standing value
        NUM_ITEMS + NUM_ITEMS + c.history_len * HISTORY_SLOT + 1 + NUM_ITEMS + 2 + 1
    }

    /// Number of informative features before zero padding.
    pub fn raw_dim(&self) -> usize {
        self.raw_dim
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn encode(&self, state: &DialogueState) -> Result<Vec<f64>, DomainError> {
        let mut out = Vec::with_capacity(self.state_dim);
        match (state, &self.layout, &self.config) {
            (
                DialogueState::Cooperative(s),
                Layout::Cooperative {
                    constraints,
                    requests,
                    domains,
                    user_acts,
                    patience,
                },
                _,
            ) => {
                let flag = |b: bool| if b { 1.0 } else { 0.0 };
                out.extend(constraints.iter().map(|c| flag(s.belief.contains_key(c))));
                out.extend(requests.iter().map(|r| flag(s.requested.contains(r))));
                out.extend(requests.iter().map(|r| flag(s.informed.contains(r))));
                out.extend(domains.iter().map(|d| flag(s.offered.contains(d))));
                out.extend(domains.iter().map(|d| flag(s.booked.contains(d))));
                let mut last = vec![0.0; *user_acts];
                if let Some(i) = s.last_user_act {
                    *last
                        .get_mut(i)
                        .ok_or_else(|| DomainError::InvalidState(format!("user act index {i} out of range")))? = 1.0;
                }
                out.extend(last);
                out.push(f64::from(s.turn.min(*patience)) / f64::from(*patience));
            }
            (DialogueState::Negotiation(s), Layout::Negotiation, EnvConfig::Negotiation(c)) => {
                let cap = |i: usize| f64::from(c.item_caps[i].max(1));
                let total = f64::from(c.total_value.max(1));
                for i in 0..NUM_ITEMS {
                    out.push(f64::from(s.scenario.item_counts[i]) / cap(i));
                }
                for v in s.own_values() {
                    out.push(f64::from(*v) / total);
                }
                let skip = c.history_len.max(s.history.len()) - c.history_len;
                let recent = &s.history[skip..];
                for k in 0..c.history_len {
                    let mut slot = [0.0; HISTORY_SLOT];
                    if let Some(act) = recent.get(k) {
                        let kind = act.kind.negotiation_slot().ok_or_else(|| {
                            DomainError::InvalidState(format!("{} in negotiation history", act.kind.name()))
                        })?;
                        slot[kind] = 1.0;
                        slot[5] = if act.actor == s.perspective { 1.0 } else { 0.0 };
                        if let Some(claim) = act.claim() {
                            for i in 0..NUM_ITEMS {
                                slot[6 + i] = f64::from(claim[i]) / cap(i);
                            }
                        }
                    }
                    out.extend(slot);
                }
                out.push(f64::from(s.turn.min(c.max_turns)) / f64::from(c.max_turns.max(1)));
                let share = s.standing_share();
                for i in 0..NUM_ITEMS {
                    out.push(share.map_or(0.0, |sh| f64::from(sh[i]) / cap(i)));
                }
                let who = s.standing.map(|(w, _)| w);
                out.push(if who == Some(s.perspective) { 1.0 } else { 0.0 });
                out.push(if who == Some(s.perspective.other()) { 1.0 } else { 0.0 });
                out.push(share.map_or(0.0, |sh| f64::from(total_value(&sh, s.own_values())) / total));
            }
            _ => {
                return Err(DomainError::InvalidState(format!(
                    "state does not belong to the {} environment",
                    self.config.name()
                )))
            }
        }
        debug_assert_eq!(out.len(), self.raw_dim);
        out.resize(self.state_dim, 0.0);
        Ok(out)
    }
}

/// Convenience wrapper building a one-off encoder.
pub fn encode_state(state: &DialogueState, config: &EnvConfig) -> Result<Vec<f64>, DomainError> {
    StateEncoder::new(config)?.encode(state)
}
