//! Negotiation and cooperative environments, scripted agents, session
//! metrics and brute-force oracles.

mod agents;
mod cooperative;
mod env;
mod log;
mod metrics;
mod negotiation;

use thiserror::Error;

use crate::domain::{DomainError, Scenario};

pub use agents::{
    expert_action, expert_system_act, play_negotiation, AlwaysAgree, Negotiator, RandomNegotiator, ThresholdNegotiator,
};
pub use cooperative::{coop_new, coop_user_step, AgendaItem, AgendaSimulator, UserTurn};
pub use env::{negotiation_record, CoopEnv, CoopReward, DialogueEnv, NegoEnv, StepResult};
pub use log::{features_digest, read_jsonl, write_jsonl, EpisodeLog, EpisodeSetup, LoggedTurn};
pub use metrics::{inform_f1, inform_precision_recall, match_rate, success, Outcome, SessionRecord, SessionStatus};
pub use negotiation::{divisions, nego_new, nego_score, pareto_optimal, GameStatus, NegotiationGame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("illegal act: {0}")]
    IllegalAct(String),
    #[error("not this agent's turn")]
    NotYourTurn,
    #[error("session already finished")]
    Finished,
    #[error("game still running")]
    StillRunning,
    #[error("episode not started")]
    NotStarted,
    #[error("no legal action available")]
    NoLegalAction,
    #[error("action index {0} outside the catalog")]
    UnknownAction(usize),
    #[error("record belongs to the other environment")]
    WrongEnvironment,
}

/// The worked example scenario, loaded from the bundled JSON fixture.
pub fn fixture_scenario() -> Scenario {
    serde_json::from_str(include_str!("../../fixtures/reference_scenario.json")).expect("bundled fixture parses")
}
