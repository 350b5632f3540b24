//! Scripted agents: the cooperative expert used for demonstrations and the
//! negotiation counterparts used for training and evaluation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{
    negotiation_catalog, total_value, ActKind, ActionCatalog, Actor, DialogueAct, NegoState, ANY_VALUE,
};

use super::negotiation::NegotiationGame;
use super::EnvError;

/// Chooses negotiation acts for one side of a game.
pub trait Negotiator: Send {
    fn choose(&mut self, view: &NegoState, legal: &[bool], catalog: &ActionCatalog) -> Result<usize, EnvError>;

    fn name(&self) -> &str;
}

fn first_legal(legal: &[bool]) -> Result<usize, EnvError> {
    legal.iter().position(|l| *l).ok_or(EnvError::NoLegalAction)
}

fn index_or_fallback(catalog: &ActionCatalog, act: &DialogueAct, legal: &[bool]) -> Result<usize, EnvError> {
    match catalog.index_of(act) {
        Some(i) if legal[i] => Ok(i),
        _ => first_legal(legal),
    }
}

/// Concedes one value point per own turn, from `start` down to `floor`.
///
/// Accepts any standing offer worth at least the current threshold, and
/// otherwise claims the cheapest bundle (fewest items) that meets it.
#[derive(Clone, Debug)]
pub struct ThresholdNegotiator {
    pub start: u32,
    pub floor: u32,
}

impl Default for ThresholdNegotiator {
    fn default() -> Self {
        Self { start: 9, floor: 6 }
    }
}

impl ThresholdNegotiator {
    pub fn threshold(&self, turn: u32) -> u32 {
        self.start.saturating_sub(turn / 2).max(self.floor)
    }
}

impl Negotiator for ThresholdNegotiator {
    fn choose(&mut self, view: &NegoState, legal: &[bool], catalog: &ActionCatalog) -> Result<usize, EnvError> {
        let values = view.own_values();
        let threshold = self.threshold(view.turn);
        if let (Some((who, _)), Some(share)) = (view.standing, view.standing_share()) {
            if who != view.perspective && total_value(&share, values) >= threshold {
                return index_or_fallback(catalog, &DialogueAct::bare(view.perspective, ActKind::Agree), legal);
            }
        }
        let mut best: Option<(usize, (u32, u32))> = None;
        for (i, act) in catalog.acts().iter().enumerate() {
            let Some(claim) = act.claim() else { continue };
            if !legal[i] {
                continue;
            }
            let v = total_value(&claim, values);
            let items: u32 = claim.iter().sum();
            // Prefer meeting the threshold with the fewest items, then the lowest surplus.
            let key = if v >= threshold {
                (items, v)
            } else {
                (u32::MAX, u32::MAX - v)
            };
            if best.is_none_or(|(_, k)| key < k) {
                best = Some((i, key));
            }
        }
        best.map(|(i, _)| i).ok_or(EnvError::NoLegalAction)
    }

    fn name(&self) -> &str {
        "threshold"
    }
}

/// Agrees whenever possible, otherwise greets.
#[derive(Clone, Debug, Default)]
pub struct AlwaysAgree;

impl Negotiator for AlwaysAgree {
    fn choose(&mut self, view: &NegoState, legal: &[bool], catalog: &ActionCatalog) -> Result<usize, EnvError> {
        let agree = DialogueAct::bare(view.perspective, ActKind::Agree);
        match catalog.index_of(&agree) {
            Some(i) if legal[i] => Ok(i),
            _ => index_or_fallback(catalog, &DialogueAct::bare(view.perspective, ActKind::Greet), legal),
        }
    }

    fn name(&self) -> &str {
        "always_agree"
    }
}

/// Uniform over legal acts.
#[derive(Clone, Debug)]
pub struct RandomNegotiator {
    pub rng: ChaCha8Rng,
}

impl Negotiator for RandomNegotiator {
    fn choose(&mut self, _view: &NegoState, legal: &[bool], _catalog: &ActionCatalog) -> Result<usize, EnvError> {
        let idx: Vec<usize> = (0..legal.len()).filter(|i| legal[*i]).collect();
        if idx.is_empty() {
            return Err(EnvError::NoLegalAction);
        }
        Ok(idx[self.rng.random_range(0..idx.len())])
    }

    fn name(&self) -> &str {
        "random"
    }
}

/// Plays `game` to the end with `target` and `opposite` seated at their sides.
pub fn play_negotiation(
    game: &mut NegotiationGame,
    target: &mut dyn Negotiator,
    opposite: &mut dyn Negotiator,
) -> Result<(), EnvError> {
    let cats = [
        negotiation_catalog(&game.config, Actor::Target)?,
        negotiation_catalog(&game.config, Actor::Opposite)?,
    ];
    while game.is_running() {
        let side = game.mover;
        let (agent, cat): (&mut dyn Negotiator, &ActionCatalog) = match side {
            Actor::Target => (&mut *target, &cats[0]),
            Actor::Opposite => (&mut *opposite, &cats[1]),
        };
        let legal = game.legal_mask(cat.acts());
        let i = agent.choose(&game.view(side), &legal, cat)?;
        game.step(cat.act(i))?;
    }
    Ok(())
}

/// Optimal reactive system policy for the agenda simulator.
///
/// Offers the domain the user last constrained, answers requests, and books
/// when asked. A failed offer makes the user volunteer the next constraint,
/// so every intent costs exactly one system turn.
pub fn expert_system_act(last_user: Option<&DialogueAct>) -> DialogueAct {
    let Some(user) = last_user else {
        return DialogueAct::bare(Actor::Target, ActKind::Hello);
    };
    match (user.kind, user.slot_name()) {
        (ActKind::Inform, Some(slot)) => {
            let domain = slot.split_once('.').map_or(slot, |(d, _)| d);
            DialogueAct::slot(Actor::Target, ActKind::Offer, domain, ANY_VALUE)
        }
        (ActKind::Request, Some(slot)) => DialogueAct::slot(Actor::Target, ActKind::Inform, slot, ANY_VALUE),
        (ActKind::Book, Some(domain)) => DialogueAct::slot(Actor::Target, ActKind::Book, domain, ANY_VALUE),
        _ => DialogueAct::bare(Actor::Target, ActKind::Hello),
    }
}

/// Catalog index of the expert act, falling back to the placeholder.
pub fn expert_action(catalog: &ActionCatalog, last_user: Option<&DialogueAct>) -> usize {
    catalog
        .index_of(&expert_system_act(last_user))
        .unwrap_or_else(|| catalog.placeholder())
}
