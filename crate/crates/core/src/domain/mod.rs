//! Dialogue acts, action catalogs, goals, scenarios and state featurization
//! shared by both environments.

mod act;
mod catalog;
mod config;
mod goal;
mod scenario;
mod state;

use thiserror::Error;

pub use act::{
    ActArgs, ActKey, ActKind, Actor, DialogueAct, ItemCounts, KeyArgs, ANY_VALUE, ITEM_NAMES, ITEM_TAGS, NUM_ITEMS,
};
pub use catalog::{enumerate_actions, negotiation_catalog, ActionCatalog, ActionIndex};
pub use config::{CooperativeConfig, DomainSpec, EnvConfig, NegotiationConfig, SlotSpec};
pub use goal::{sample_goal, DomainGoal, Goal};
pub use scenario::{reference_scenario, total_value, value_vectors, Scenario, ScenarioSpace};
pub use state::{encode_state, CoopState, DialogueState, NegoState, StateEncoder};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("action catalog has {size} entries, cap is {cap}")]
    CatalogTooLarge { size: usize, cap: usize },
    #[error("catalog lacks placeholder act {0:?}")]
    MissingPlaceholder(ActKind),
    #[error("act kind {0:?} is not in the cooperative grammar")]
    KindNotInGrammar(ActKind),
    #[error("act not in catalog: {0}")]
    UnknownAct(String),
    #[error("action index belongs to a different catalog")]
    CatalogMismatch,
    #[error("state has {features} features but state_dim is {state_dim}")]
    StateDimTooSmall { features: usize, state_dim: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no feasible scenario under config")]
    NoFeasibleScenario,
    #[error("invalid goal: {0}")]
    InvalidGoal(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}
