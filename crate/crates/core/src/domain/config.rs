use serde::{Deserialize, Serialize};

use super::act::{ActKind, ItemCounts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub constraints: Vec<SlotSpec>,
    pub requests: Vec<String>,
}

impl DomainSpec {
    /// Fully qualified slot name, `domain.slot`.
    pub fn qualify(&self, slot: &str) -> String {
        format!("{}.{}", self.name, slot)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CooperativeConfig {
    pub domains: Vec<DomainSpec>,
    /// Kinds available to the system side, in catalog order.
    pub system_kinds: Vec<ActKind>,
    /// Target turns before the simulated user gives up.
    pub patience: u32,
    pub goal_domains: (usize, usize),
    pub goal_constraints: (usize, usize),
    pub goal_requests: (usize, usize),
    pub max_catalog: usize,
    pub state_dim: usize,
}

fn slot(name: &str, values: &[&str]) -> SlotSpec {
    SlotSpec {
        name: name.into(),
        values: values.iter().map(|v| v.to_string()).collect(),
    }
}

impl Default for CooperativeConfig {
    fn default() -> Self {
        Self {
            domains: vec![
                DomainSpec {
                    name: "restaurant".into(),
                    constraints: vec![
                        slot("area", &["north", "south", "centre"]),
                        slot("food", &["thai", "italian", "indian"]),
                        slot("price", &["cheap", "moderate", "expensive"]),
                    ],
                    requests: vec!["phone".into(), "address".into(), "postcode".into()],
                },
                DomainSpec {
                    name: "hotel".into(),
                    constraints: vec![
                        slot("area", &["north", "south", "centre"]),
                        slot("stars", &["2", "3", "4"]),
                        slot("parking", &["yes", "no"]),
                    ],
                    requests: vec!["phone".into(), "address".into(), "internet".into()],
                },
            ],
            system_kinds: vec![
                ActKind::Inform,
                ActKind::Request,
                ActKind::Offer,
                ActKind::Book,
                ActKind::Bye,
                ActKind::Hello,
            ],
            patience: 12,
            goal_domains: (1, 2),
            goal_constraints: (1, 2),
            goal_requests: (1, 2),
            max_catalog: 512,
            state_dim: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NegotiationConfig {
    /// Largest count per item type; proposals are enumerated up to these caps.
    pub item_caps: ItemCounts,
    pub max_turns: u32,
    /// Number of recent acts kept in the encoded state.
    pub history_len: usize,
    /// Every agent's values sum to this over the pool.
    pub total_value: u32,
    pub min_total_items: u32,
    pub max_catalog: usize,
    pub state_dim: usize,
}

impl Default for NegotiationConfig {
    fn default() -> Self {
        Self {
            item_caps: [4, 4, 4],
            max_turns: 20,
            history_len: 4,
            total_value: 10,
            min_total_items: 1,
            max_catalog: 512,
            state_dim: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Cooperative(CooperativeConfig),
    Negotiation(NegotiationConfig),
}

impl EnvConfig {
    pub fn state_dim(&self) -> usize {
        match self {
            EnvConfig::Cooperative(c) => c.state_dim,
            EnvConfig::Negotiation(c) => c.state_dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Cooperative(_) => "cooperative",
            EnvConfig::Negotiation(_) => "negotiation",
        }
    }
}
