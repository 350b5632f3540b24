use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{Actor, DialogueAct, Goal, Scenario};

use super::metrics::{Outcome, SessionRecord, SessionStatus};

/// 64-bit digest of a feature vector (bit patterns, so distinct zeros differ).
pub fn features_digest(features: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    for f in features {
        f.to_bits().hash(&mut h);
    }
    h.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedTurn {
    pub actor: Actor,
    pub act: DialogueAct,
    /// Digest of the acting agent's encoded state before the act.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_features_digest: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeSetup {
    Scenario(Scenario),
    Goal(Goal),
}

/// One line of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode_id: u64,
    pub setup: EpisodeSetup,
    pub turns: Vec<LoggedTurn>,
    pub outcome: SessionStatus,
    pub rewards: Vec<f64>,
}

impl EpisodeLog {
    /// `digests` pairs up with the record's acts; missing entries are omitted.
    pub fn from_record(episode_id: u64, record: &SessionRecord, digests: &[Option<u64>], rewards: Vec<f64>) -> Self {
        let setup = match &record.outcome {
            Outcome::Cooperative { goal, .. } => EpisodeSetup::Goal(goal.clone()),
            Outcome::Negotiation { scenario, .. } => EpisodeSetup::Scenario(scenario.clone()),
        };
        Self {
            episode_id,
            setup,
            turns: record
                .acts
                .iter()
                .enumerate()
                .map(|(i, a)| LoggedTurn {
                    actor: a.actor,
                    act: a.clone(),
                    state_features_digest: digests.get(i).copied().flatten(),
                })
                .collect(),
            outcome: record.status,
            rewards,
        }
    }
}

pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
