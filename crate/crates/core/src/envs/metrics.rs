use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Actor, DialogueAct, Goal, ItemCounts, Scenario};

use super::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Success,
    Failure,
    Agreed,
    NoDeal,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum Outcome {
    Cooperative {
        goal: Goal,
        /// Every slot the system informed, relevant or not.
        informed: BTreeSet<String>,
        /// Goal domain → whether its last booking satisfied all constraints.
        booked: BTreeMap<String, bool>,
    },
    Negotiation {
        scenario: Scenario,
        /// (target, opposite) shares when agreed.
        allocation: Option<(ItemCounts, ItemCounts)>,
        score_target: u32,
        score_opposite: u32,
    },
}

/// Everything needed to score one finished dialogue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub acts: Vec<DialogueAct>,
    pub status: SessionStatus,
    pub outcome: Outcome,
    /// Number of target-agent turns.
    pub turns: u32,
}

type CoopOutcome<'a> = (&'a Goal, &'a BTreeSet<String>, &'a BTreeMap<String, bool>);

impl SessionRecord {
    pub fn target_turns(acts: &[DialogueAct]) -> u32 {
        acts.iter().filter(|a| a.actor == Actor::Target).count() as u32
    }

    fn cooperative(&self) -> Result<CoopOutcome<'_>, EnvError> {
        match &self.outcome {
            Outcome::Cooperative { goal, informed, booked } => Ok((goal, informed, booked)),
            Outcome::Negotiation { .. } => Err(EnvError::WrongEnvironment),
        }
    }
}

/// Precision and recall of informed slots against requested slots.
pub fn inform_precision_recall(record: &SessionRecord) -> Result<(f64, f64), EnvError> {
    let (goal, informed, _) = record.cooperative()?;
    let requested: BTreeSet<String> = goal.requested_slots().into_iter().collect();
    let hit = informed.intersection(&requested).count() as f64;
    let precision = if informed.is_empty() {
        0.0
    } else {
        hit / informed.len() as f64
    };
    let recall = if requested.is_empty() {
        1.0
    } else {
        hit / requested.len() as f64
    };
    Ok((precision, recall))
}

pub fn inform_f1(record: &SessionRecord) -> Result<f64, EnvError> {
    let (p, r) = inform_precision_recall(record)?;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Fraction of goal domains whose booking satisfied every constraint.
pub fn match_rate(record: &SessionRecord) -> Result<f64, EnvError> {
    let (goal, _, booked) = record.cooperative()?;
    if goal.domains.is_empty() {
        return Ok(1.0);
    }
    let ok = goal
        .domains
        .iter()
        .filter(|d| booked.get(&d.domain).copied().unwrap_or(false))
        .count();
    Ok(ok as f64 / goal.domains.len() as f64)
}

pub fn success(record: &SessionRecord) -> Result<bool, EnvError> {
    let (_, recall) = inform_precision_recall(record)?;
    Ok(recall == 1.0 && match_rate(record)? == 1.0)
}
