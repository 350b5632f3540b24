use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    ActionCatalog, Actor, DialogueState, EnvConfig, NegoState, NegotiationConfig, ScenarioSpace, StateEncoder,
};
use crate::envs::{play_negotiation, EnvError, GameStatus, NegotiationGame, Negotiator};

use super::train::TrainedPolicy;
use super::{derive_seed, HarnessError};

pub const CROSSPLAY_STREAM: u64 = 6;

/// A trained greedy policy seated at either side of a negotiation.
pub struct PolicyNegotiator {
    pub name: String,
    pub policy: TrainedPolicy,
    pub encoder: StateEncoder,
}

impl PolicyNegotiator {
    pub fn new(name: &str, policy: TrainedPolicy, config: &NegotiationConfig) -> Result<Self, HarnessError> {
        Ok(Self {
            name: name.into(),
            policy,
            encoder: StateEncoder::new(&EnvConfig::Negotiation(config.clone()))?,
        })
    }
}

impl Negotiator for PolicyNegotiator {
    fn choose(&mut self, view: &NegoState, legal: &[bool], _catalog: &ActionCatalog) -> Result<usize, EnvError> {
        let state = self.encoder.encode(&DialogueState::Negotiation(view.clone()))?;
        self.policy
            .greedy(&state, Some(legal))
            .map_err(|e| EnvError::IllegalAct(format!("policy failure: {e}")))
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Average scores of two negotiators that played each other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossplayResult {
    pub a: String,
    pub b: String,
    pub episodes: usize,
    pub all: (f64, f64),
    pub agreed: (f64, f64),
    pub agreed_pct: f64,
}

/// One line of the cross-play CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossplayRow {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub score_a: f64,
    pub score_b: f64,
}

impl CrossplayResult {
    /// `"x vs y"` for the all-sessions and agreed-sessions averages.
    pub fn versus(&self) -> (String, String) {
        (
            format!("{:.1} vs. {:.1}", self.all.0, self.all.1),
            format!("{:.1} vs. {:.1}", self.agreed.0, self.agreed.1),
        )
    }

    pub fn rows(&self) -> Vec<CrossplayRow> {
        [("all", self.all), ("agreed", self.agreed)]
            .into_iter()
            .map(|(m, (x, y))| CrossplayRow {
                a: self.a.clone(),
                b: self.b.clone(),
                metric: m.into(),
                score_a: x,
                score_b: y,
            })
            .collect()
    }
}

/// `a` sits at the target seat and `b` at the opposite seat; the first mover
/// alternates between episodes, starting with `b`.
pub fn run_crossplay(
    config: &NegotiationConfig,
    a: &mut dyn Negotiator,
    b: &mut dyn Negotiator,
    episodes: usize,
    seed: u64,
) -> Result<CrossplayResult, HarnessError> {
    let space = ScenarioSpace::new(config)?;
    let (mut all_a, mut all_b, mut ag_a, mut ag_b, mut agreed) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for i in 0..episodes {
        let scenario = space.sample(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            CROSSPLAY_STREAM,
            i as u64,
        )));
        let first = if i % 2 == 0 { Actor::Opposite } else { Actor::Target };
        let mut game = NegotiationGame::new(scenario, config.clone(), first)?;
        play_negotiation(&mut game, a, b)?;
        let (sa, sb) = (
            f64::from(game.score(Actor::Target)?),
            f64::from(game.score(Actor::Opposite)?),
        );
        all_a += sa;
        all_b += sb;
        if game.status == GameStatus::Agreed {
            agreed += 1;
            ag_a += sa;
            ag_b += sb;
        }
    }
    let n = episodes.max(1) as f64;
    let k = agreed.max(1) as f64;
    Ok(CrossplayResult {
        a: a.name().into(),
        b: b.name().into(),
        episodes,
        all: (all_a / n, all_b / n),
        agreed: (ag_a / k, ag_b / k),
        agreed_pct: 100.0 * agreed as f64 / n,
    })
}
