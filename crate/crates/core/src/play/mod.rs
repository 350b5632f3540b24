//! Live negotiation sessions between a human and a loaded policy.
//!
//! The human always sits at the opposite seat and the policy at the target
//! seat, which is the seat it was trained in. Views handed to the human carry
//! the human's values only.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    negotiation_catalog, ActionCatalog, Actor, DialogueAct, DialogueState, EnvConfig, ItemCounts, NegotiationConfig,
    Scenario, ScenarioSpace, StateEncoder,
};
use crate::envs::{pareto_optimal, EnvError, GameStatus, NegotiationGame};
use crate::harness::TrainedPolicy;

pub const HUMAN_SEAT: Actor = Actor::Opposite;
pub const AGENT_SEAT: Actor = Actor::Target;
pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown checkpoint {0}")]
    UnknownCheckpoint(String),
    #[error("not your turn")]
    NotYourTurn,
    #[error("illegal act: {0}")]
    IllegalAct(String),
    #[error("session is finished")]
    Finished,
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("agent failure: {0}")]
    Agent(String),
}

impl From<EnvError> for PlayError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::NotYourTurn => PlayError::NotYourTurn,
            EnvError::Finished => PlayError::Finished,
            EnvError::IllegalAct(m) => PlayError::IllegalAct(m),
            other => PlayError::IllegalAct(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Human,
    Agent,
}

impl Side {
    fn of(actor: Actor) -> Self {
        if actor == HUMAN_SEAT {
            Side::Human
        } else {
            Side::Agent
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub side: Side,
    pub act: DialogueAct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalScores {
    pub human: u32,
    pub agent: u32,
    pub pareto_optimal: bool,
}

/// Everything the human may see about a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub checkpoint: String,
    pub status: GameStatus,
    pub whose_turn: Option<Side>,
    pub item_counts: ItemCounts,
    pub my_values: ItemCounts,
    pub transcript: Vec<TranscriptEntry>,
    /// Items the human would receive if the standing proposal were accepted.
    pub standing_share: Option<ItemCounts>,
    pub scores: Option<FinalScores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActOutcome {
    pub human_act: DialogueAct,
    pub agent_reply: Option<DialogueAct>,
    pub view: SessionView,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub checkpoint: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
}

/// A loaded policy with its immutable parameters.
pub struct ServedAgent {
    pub policy: TrainedPolicy,
    pub config: NegotiationConfig,
    encoder: StateEncoder,
    catalog: ActionCatalog,
    human_catalog: ActionCatalog,
}

impl ServedAgent {
    pub fn new(policy: TrainedPolicy, config: NegotiationConfig) -> Result<Self, PlayError> {
        let bad = |e: crate::domain::DomainError| PlayError::BadRequest(e.to_string());
        Ok(Self {
            encoder: StateEncoder::new(&EnvConfig::Negotiation(config.clone())).map_err(bad)?,
            catalog: negotiation_catalog(&config, AGENT_SEAT).map_err(bad)?,
            human_catalog: negotiation_catalog(&config, HUMAN_SEAT).map_err(bad)?,
            policy,
            config,
        })
    }

    /// Greedy move for the agent seat.
    pub fn reply(&self, game: &NegotiationGame) -> Result<DialogueAct, PlayError> {
        let legal = game.legal_mask(self.catalog.acts());
        let state = self
            .encoder
            .encode(&DialogueState::Negotiation(game.view(AGENT_SEAT)))
            .map_err(|e| PlayError::Agent(e.to_string()))?;
        let i = self
            .policy
            .greedy(&state, Some(&legal))
            .map_err(|e| PlayError::Agent(e.to_string()))?;
        Ok(self.catalog.act(i).clone())
    }
}

struct Session {
    checkpoint: String,
    agent: Arc<ServedAgent>,
    game: NegotiationGame,
    last_used: Instant,
}

impl Session {
    fn view(&self, id: &str) -> SessionView {
        let g = &self.game;
        let scores = (!g.is_running()).then(|| {
            let human = g.score(HUMAN_SEAT).unwrap_or(0);
            let agent = g.score(AGENT_SEAT).unwrap_or(0);
            let (a, b) = match HUMAN_SEAT {
                Actor::Target => (human, agent),
                Actor::Opposite => (agent, human),
            };
            FinalScores {
                human,
                agent,
                pareto_optimal: g.status == GameStatus::Agreed && pareto_optimal(&g.scenario, a, b),
            }
        });
        SessionView {
            id: id.into(),
            checkpoint: self.checkpoint.clone(),
            status: g.status,
            whose_turn: g.is_running().then(|| Side::of(g.mover)),
            item_counts: g.scenario.item_counts,
            my_values: *g.scenario.values(HUMAN_SEAT),
            transcript: g
                .transcript
                .iter()
                .map(|a| TranscriptEntry {
                    side: Side::of(a.actor),
                    act: a.clone(),
                })
                .collect(),
            standing_share: g.view(HUMAN_SEAT).standing_share(),
            scores,
        }
    }

    fn legal_actions(&self) -> Vec<DialogueAct> {
        if !self.game.is_running() || self.game.mover != HUMAN_SEAT {
            return Vec::new();
        }
        let acts = self.agent.human_catalog.acts();
        acts.iter()
            .zip(self.game.legal_mask(acts))
            .filter(|(_, ok)| *ok)
            .map(|(a, _)| a.clone())
            .collect()
    }
}

/// In-memory session store; each session is guarded by its own lock.
pub struct PlayService {
    agents: HashMap<String, Arc<ServedAgent>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    idle: Duration,
    counter: AtomicU64,
    transcript_log: Option<PathBuf>,
}

impl PlayService {
    pub fn new(idle: Duration) -> Self {
        Self {
            agents: HashMap::new(),
            sessions: Mutex::new(HashMap::new()),
            idle,
            counter: AtomicU64::new(0),
            transcript_log: None,
        }
    }

    pub fn with_agent(mut self, name: &str, agent: ServedAgent) -> Self {
        self.agents.insert(name.into(), Arc::new(agent));
        self
    }

    /// Appends one JSON line per finished session to `path`.
    pub fn with_transcript_log(mut self, path: PathBuf) -> Self {
        self.transcript_log = Some(path);
        self
    }

    pub fn checkpoints(&self) -> Vec<String> {
        let mut v: Vec<String> = self.agents.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    /// Drops sessions idle for longer than the expiry; returns how many went.
    pub fn sweep(&self, now: Instant) -> usize {
        let mut map = self.sessions.lock().expect("session map poisoned");
        let before = map.len();
        map.retain(|_, s| match s.try_lock() {
            Ok(s) => now.saturating_duration_since(s.last_used) <= self.idle,
            Err(_) => true,
        });
        before - map.len()
    }

    fn next_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let salt: u64 = rand::rng().random();
        format!("{n:x}-{salt:016x}")
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, PlayError> {
        self.sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| PlayError::UnknownSession(id.into()))
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionView, PlayError> {
        self.sweep(Instant::now());
        let agent = self
            .agents
            .get(&req.checkpoint)
            .cloned()
            .ok_or_else(|| PlayError::UnknownCheckpoint(req.checkpoint.clone()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed.unwrap_or_else(|| rand::rng().random()));
        let scenario = match &req.scenario {
            Some(s) => {
                s.validate(&agent.config)
                    .map_err(|e| PlayError::BadRequest(e.to_string()))?;
                s.clone()
            }
            None => ScenarioSpace::new(&agent.config)
                .map_err(|e| PlayError::BadRequest(e.to_string()))?
                .sample(&mut rng),
        };
        let first = if rng.random_bool(0.5) { AGENT_SEAT } else { HUMAN_SEAT };
        let mut game = NegotiationGame::new(scenario, agent.config.clone(), first)?;
        if first == AGENT_SEAT {
            let reply = agent.reply(&game)?;
            game.step(&reply)?;
        }
        let id = self.next_id();
        let session = Session {
            checkpoint: req.checkpoint.clone(),
            agent,
            game,
            last_used: Instant::now(),
        };
        let view = session.view(&id);
        self.sessions
            .lock()
            .expect("session map poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(view)
    }

    pub fn get_state(&self, id: &str) -> Result<SessionView, PlayError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        s.last_used = Instant::now();
        Ok(s.view(id))
    }

    pub fn list_actions(&self, id: &str) -> Result<Vec<DialogueAct>, PlayError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        s.last_used = Instant::now();
        Ok(s.legal_actions())
    }

    /// Applies the human act and, if the game goes on, the agent's reply.
    /// On any error the session is left untouched.
    pub fn post_act(&self, id: &str, act: &DialogueAct) -> Result<ActOutcome, PlayError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session poisoned");
        s.last_used = Instant::now();
        if !s.game.is_running() {
            return Err(PlayError::Finished);
        }
        if s.game.mover != HUMAN_SEAT {
            return Err(PlayError::NotYourTurn);
        }
        if act.actor != HUMAN_SEAT {
            return Err(PlayError::IllegalAct(format!(
                "acts must be played as {:?}",
                HUMAN_SEAT
            )));
        }
        let mut game = s.game.clone();
        game.step(act)?;
        if s.agent.human_catalog.index_of(act).is_none() {
            return Err(PlayError::IllegalAct(format!("{act} is not in the action catalog")));
        }
        let agent_reply = if game.is_running() {
            let reply = s.agent.reply(&game)?;
            game.step(&reply)?;
            Some(reply)
        } else {
            None
        };
        s.game = game;
        if !s.game.is_running() {
            self.log_transcript(id, &s);
        }
        Ok(ActOutcome {
            human_act: act.clone(),
            agent_reply,
            view: s.view(id),
        })
    }

    fn log_transcript(&self, id: &str, s: &Session) {
        let Some(path) = &self.transcript_log else { return };
        let line = serde_json::json!({ "id": id, "checkpoint": s.checkpoint, "game": s.game });
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            eprintln!("transcript log {}: {e}", path.display());
        }
    }
}

#[cfg(test)]
mod tests;
