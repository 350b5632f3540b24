use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of negotiable item types.
pub const NUM_ITEMS: usize = 3;
pub const ITEM_NAMES: [&str; NUM_ITEMS] = ["book", "hat", "ball"];
/// Short per-item labels used in canonical act tokens.
pub const ITEM_TAGS: [&str; NUM_ITEMS] = ["b", "h", "l"];

/// Per-item-type counts (book, hat, ball).
pub type ItemCounts = [u32; NUM_ITEMS];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Target,
    Opposite,
}

impl Actor {
    pub fn other(self) -> Self {
        match self {
            Actor::Target => Actor::Opposite,
            Actor::Opposite => Actor::Target,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActKind {
    Inform,
    Request,
    Book,
    Offer,
    Bye,
    Hello,
    Thanks,
    Propose,
    Agree,
    Disagree,
    End,
    Greet,
}

impl ActKind {
    pub const COOPERATIVE: [ActKind; 7] = [
        ActKind::Inform,
        ActKind::Request,
        ActKind::Book,
        ActKind::Offer,
        ActKind::Bye,
        ActKind::Hello,
        ActKind::Thanks,
    ];
    pub const NEGOTIATION: [ActKind; 5] = [
        ActKind::Propose,
        ActKind::Agree,
        ActKind::Disagree,
        ActKind::End,
        ActKind::Greet,
    ];

    pub fn is_cooperative(self) -> bool {
        Self::COOPERATIVE.contains(&self)
    }

    pub fn is_negotiation(self) -> bool {
        Self::NEGOTIATION.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActKind::Inform => "inform",
            ActKind::Request => "request",
            ActKind::Book => "book",
            ActKind::Offer => "offer",
            ActKind::Bye => "bye",
            ActKind::Hello => "hello",
            ActKind::Thanks => "thanks",
            ActKind::Propose => "propose",
            ActKind::Agree => "agree",
            ActKind::Disagree => "disagree",
            ActKind::End => "end",
            ActKind::Greet => "greet",
        }
    }

    /// Position within the negotiation grammar, used by the state encoder.
    pub fn negotiation_slot(self) -> Option<usize> {
        Self::NEGOTIATION.iter().position(|k| *k == self)
    }
}

/// Arguments of an act: slot/value pairs for the cooperative grammar,
/// self-claimed item counts for a negotiation proposal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActArgs {
    None,
    Slots(Vec<(String, String)>),
    Counts(ItemCounts),
}

/// Value used for slot arguments whose concrete value is irrelevant at act level.
pub const ANY_VALUE: &str = "?";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub actor: Actor,
    pub kind: ActKind,
    pub args: ActArgs,
}

impl DialogueAct {
    pub fn new(actor: Actor, kind: ActKind, args: ActArgs) -> Self {
        Self { actor, kind, args }
    }

    pub fn bare(actor: Actor, kind: ActKind) -> Self {
        Self::new(actor, kind, ActArgs::None)
    }

    pub fn slot(actor: Actor, kind: ActKind, slot: &str, value: &str) -> Self {
        Self::new(actor, kind, ActArgs::Slots(vec![(slot.into(), value.into())]))
    }

    pub fn propose(actor: Actor, claim: ItemCounts) -> Self {
        Self::new(actor, ActKind::Propose, ActArgs::Counts(claim))
    }

    pub fn with_actor(&self, actor: Actor) -> Self {
        Self { actor, ..self.clone() }
    }

    /// First slot name, if any.
    pub fn slot_name(&self) -> Option<&str> {
        match &self.args {
            ActArgs::Slots(s) => s.first().map(|(k, _)| k.as_str()),
            _ => None,
        }
    }

    pub fn claim(&self) -> Option<ItemCounts> {
        match self.args {
            ActArgs::Counts(c) => Some(c),
            _ => None,
        }
    }

    /// Catalog identity: kind plus slot names or counts, ignoring actor and slot values.
    pub fn key(&self) -> ActKey {
        let args = match &self.args {
            ActArgs::None => KeyArgs::None,
            ActArgs::Slots(s) => KeyArgs::Slots(s.iter().map(|(k, _)| k.clone()).collect()),
            ActArgs::Counts(c) => KeyArgs::Counts(*c),
        };
        ActKey { kind: self.kind, args }
    }

    /// Canonical token rendering, e.g. `propose b=1 h=0 l=1` or `inform restaurant.phone`.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = vec![self.kind.name().to_string()];
        match &self.args {
            ActArgs::None => {}
            ActArgs::Slots(s) => out.extend(s.iter().map(|(k, _)| k.clone())),
            ActArgs::Counts(c) => out.extend(ITEM_TAGS.iter().zip(c).map(|(tag, n)| format!("{tag}={n}"))),
        }
        out
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tokens().join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActKey {
    pub kind: ActKind,
    pub args: KeyArgs,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum KeyArgs {
    None,
    Slots(Vec<String>),
    Counts(ItemCounts),
}
