use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ActKind, Actor, DialogueAct, NegotiationConfig, Scenario, ITEM_TAGS, NUM_ITEMS};

use super::RewardError;

pub const UNK: &str = "<unk>";
pub const SELF_MARK: &str = "you:";
pub const OTHER_MARK: &str = "them:";

const NEGOTIATION_KINDS: [ActKind; 5] = [
    ActKind::Propose,
    ActKind::Agree,
    ActKind::Disagree,
    ActKind::End,
    ActKind::Greet,
];

/// Closed token vocabulary of canonical negotiation act strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Speaker marks, act kinds, per-item claim tokens and goal tokens, in a fixed order.
    pub fn for_negotiation(config: &NegotiationConfig) -> Self {
        let mut tokens = vec![UNK.to_string(), SELF_MARK.into(), OTHER_MARK.into()];
        tokens.extend(NEGOTIATION_KINDS.iter().map(|k| k.name().to_string()));
        for (i, tag) in ITEM_TAGS.iter().enumerate() {
            tokens.extend((0..=config.item_caps[i]).map(|n| format!("{tag}={n}")));
        }
        for tag in ITEM_TAGS {
            tokens.extend((0..=config.total_value).map(|v| format!("{tag}:{v}")));
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    /// Index of `token`, or of `<unk>` for anything outside the vocabulary.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }
}

/// Token indices of one session plus the goal sequence of the predicting agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTokens {
    pub tokens: Vec<usize>,
    pub goal: Vec<usize>,
}

impl SessionTokens {
    pub fn validate(&self, vocab: &Vocab) -> Result<(), RewardError> {
        if self.tokens.is_empty() || self.goal.is_empty() {
            return Err(RewardError::EmptySession);
        }
        if let Some(t) = self.tokens.iter().chain(&self.goal).find(|t| **t >= vocab.len()) {
            return Err(RewardError::UnknownToken(*t));
        }
        Ok(())
    }
}

/// The acts in time order, each prefixed by a speaker mark relative to `perspective`.
pub fn session_strings(acts: &[DialogueAct], perspective: Actor) -> Vec<String> {
    let mut out = Vec::new();
    for a in acts {
        out.push(if a.actor == perspective { SELF_MARK } else { OTHER_MARK }.to_string());
        out.extend(a.tokens());
    }
    out
}

/// `b=count b:value h=count h:value ...` for the agent's own side of the scenario.
pub fn goal_strings(scenario: &Scenario, perspective: Actor) -> Vec<String> {
    let values = scenario.values(perspective);
    (0..NUM_ITEMS)
        .flat_map(|i| {
            [
                format!("{}={}", ITEM_TAGS[i], scenario.item_counts[i]),
                format!("{}:{}", ITEM_TAGS[i], values[i]),
            ]
        })
        .collect()
}
