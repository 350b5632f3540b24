use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Actor, ItemCounts, NegotiationConfig, ScenarioSpace};
use crate::envs::{
    nego_score, play_negotiation, AlwaysAgree, GameStatus, NegotiationGame, Negotiator, ThresholdNegotiator,
};

use super::vocab::{goal_strings, session_strings, SessionTokens, Vocab};
use super::RewardError;

/// One JSONL line of a reward-model corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardExample {
    pub tokens: Vec<String>,
    pub goal_tokens: Vec<String>,
    /// Items of each type that ended with the predicting agent (zeros without a deal).
    pub outcome: ItemCounts,
    pub agreed: bool,
    pub values: ItemCounts,
    /// Score the environment assigned to the predicting agent.
    pub score: u32,
}

impl RewardExample {
    /// Labelled example from the target agent's side of a finished game.
    pub fn from_game(game: &NegotiationGame) -> Result<Self, RewardError> {
        let agreed = game.status == GameStatus::Agreed;
        Ok(Self {
            tokens: session_strings(&game.transcript, Actor::Target),
            goal_tokens: goal_strings(&game.scenario, Actor::Target),
            outcome: game.allocation_of(Actor::Target).unwrap_or([0; 3]),
            agreed,
            values: *game.scenario.values(Actor::Target),
            score: nego_score(game, Actor::Target)?,
        })
    }

    pub fn encode(&self, vocab: &Vocab) -> (SessionTokens, ItemCounts) {
        (
            SessionTokens {
                tokens: vocab.encode(&self.tokens),
                goal: vocab.encode(&self.goal_tokens),
            },
            self.outcome,
        )
    }
}

/// Sessions between a threshold negotiator and either another threshold
/// negotiator or an always-agree partner, with randomized firmness.
///
/// The label is a deterministic function of the transcript: the last
/// standing proposal when the session ends in agreement, nothing otherwise.
pub fn synthetic_corpus(config: &NegotiationConfig, n: usize, seed: u64) -> Result<Vec<RewardExample>, RewardError> {
    let space = ScenarioSpace::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let scenario = space.sample(&mut rng);
        let first = if rng.random::<bool>() {
            Actor::Target
        } else {
            Actor::Opposite
        };
        let start = rng.random_range(6..=10);
        let mut target = ThresholdNegotiator {
            start,
            floor: rng.random_range(3..=start.min(7)),
        };
        let mut opposite: Box<dyn Negotiator> = if rng.random::<f64>() < 0.6 {
            let start = rng.random_range(6..=10);
            Box::new(ThresholdNegotiator {
                start,
                floor: rng.random_range(3..=start.min(7)),
            })
        } else {
            Box::new(AlwaysAgree)
        };
        let mut game = NegotiationGame::new(scenario, config.clone(), first)?;
        play_negotiation(&mut game, &mut target, opposite.as_mut())?;
        out.push(RewardExample::from_game(&game)?);
    }
    Ok(out)
}
