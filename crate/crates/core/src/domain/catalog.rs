use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::act::{ActKey, ActKind, Actor, DialogueAct, ANY_VALUE, NUM_ITEMS};
use super::config::{CooperativeConfig, EnvConfig, NegotiationConfig};
use super::DomainError;

/// Position of an act inside a specific catalog.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionIndex {
    pub index: usize,
    pub catalog_id: u64,
}

/// Deterministic enumeration of every act one side may take.
#[derive(Clone, Debug)]
pub struct ActionCatalog {
    id: u64,
    side: Actor,
    acts: Vec<DialogueAct>,
    lookup: HashMap<ActKey, usize>,
    placeholder: usize,
}

impl ActionCatalog {
    fn build(side: Actor, acts: Vec<DialogueAct>, placeholder_kind: ActKind, cap: usize) -> Result<Self, DomainError> {
        if acts.len() > cap {
            return Err(DomainError::CatalogTooLarge { size: acts.len(), cap });
        }
        let mut hasher = DefaultHasher::new();
        side.hash(&mut hasher);
        let mut lookup = HashMap::with_capacity(acts.len());
        for (i, a) in acts.iter().enumerate() {
            a.kind.hash(&mut hasher);
            a.args.hash(&mut hasher);
            lookup.insert(a.key(), i);
        }
        let placeholder = acts
            .iter()
            .position(|a| a.kind == placeholder_kind)
            .ok_or(DomainError::MissingPlaceholder(placeholder_kind))?;
        Ok(Self {
            id: hasher.finish(),
            side,
            acts,
            lookup,
            placeholder,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn side(&self) -> Actor {
        self.side
    }

    pub fn len(&self) -> usize {
        self.acts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }

    pub fn acts(&self) -> &[DialogueAct] {
        &self.acts
    }

    pub fn act(&self, index: usize) -> &DialogueAct {
        &self.acts[index]
    }

    /// The neutral act (`hello` / `greet`) fed as the constant opposite-act
    /// placeholder when sampling candidates.
    pub fn placeholder(&self) -> usize {
        self.placeholder
    }

    pub fn index_of(&self, act: &DialogueAct) -> Option<usize> {
        self.lookup.get(&act.key()).copied()
    }

    pub fn act_to_index(&self, act: &DialogueAct) -> Result<ActionIndex, DomainError> {
        if act.actor != self.side {
            return Err(DomainError::UnknownAct(format!("{act} (actor {:?})", act.actor)));
        }
        self.index_of(act)
            .map(|index| ActionIndex {
                index,
                catalog_id: self.id,
            })
            .ok_or_else(|| DomainError::UnknownAct(act.to_string()))
    }

    pub fn index_to_act(&self, index: ActionIndex) -> Result<DialogueAct, DomainError> {
        if index.catalog_id != self.id {
            return Err(DomainError::CatalogMismatch);
        }
        self.acts
            .get(index.index)
            .cloned()
            .ok_or_else(|| DomainError::UnknownAct(format!("index {}", index.index)))
    }

    pub fn action_index(&self, index: usize) -> ActionIndex {
        ActionIndex {
            index,
            catalog_id: self.id,
        }
    }
}

/// Catalog for `side` in the configured environment.
pub fn enumerate_actions(config: &EnvConfig, side: Actor) -> Result<ActionCatalog, DomainError> {
    match config {
        EnvConfig::Negotiation(c) => negotiation_catalog(c, side),
        EnvConfig::Cooperative(c) => match side {
            Actor::Target => system_catalog(c),
            Actor::Opposite => user_catalog(c),
        },
    }
}

/// Every claim vector within the caps, then `agree, disagree, end, greet`.
pub fn negotiation_catalog(config: &NegotiationConfig, side: Actor) -> Result<ActionCatalog, DomainError> {
    let caps = config.item_caps;
    let total: usize = caps.iter().map(|c| *c as usize + 1).product::<usize>() + 4;
    if total > config.max_catalog {
        return Err(DomainError::CatalogTooLarge {
            size: total,
            cap: config.max_catalog,
        });
    }
    let mut acts = Vec::with_capacity(total);
    let mut claim = [0u32; NUM_ITEMS];
    loop {
        acts.push(DialogueAct::propose(side, claim));
        let mut i = NUM_ITEMS;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            if claim[i] < caps[i] {
                claim[i] += 1;
                break;
            }
            claim[i] = 0;
            if i == 0 {
                i = usize::MAX;
                break;
            }
        }
        if i == usize::MAX {
            break;
        }
    }
    for kind in [ActKind::Agree, ActKind::Disagree, ActKind::End, ActKind::Greet] {
        acts.push(DialogueAct::bare(side, kind));
    }
    ActionCatalog::build(side, acts, ActKind::Greet, config.max_catalog)
}

fn system_catalog(config: &CooperativeConfig) -> Result<ActionCatalog, DomainError> {
    let mut acts = Vec::new();
    for d in &config.domains {
        for kind in &config.system_kinds {
            match kind {
                ActKind::Inform => {
                    for r in &d.requests {
                        acts.push(DialogueAct::slot(Actor::Target, *kind, &d.qualify(r), ANY_VALUE));
                    }
                }
                ActKind::Request => {
                    for c in &d.constraints {
                        acts.push(DialogueAct::slot(Actor::Target, *kind, &d.qualify(&c.name), ANY_VALUE));
                    }
                }
                ActKind::Offer | ActKind::Book => {
                    acts.push(DialogueAct::slot(Actor::Target, *kind, &d.name, ANY_VALUE));
                }
                _ => {}
            }
        }
    }
    for kind in &config.system_kinds {
        if matches!(kind, ActKind::Bye | ActKind::Hello | ActKind::Thanks) {
            acts.push(DialogueAct::bare(Actor::Target, *kind));
        }
    }
    if let Some(k) = config.system_kinds.iter().find(|k| !k.is_cooperative()) {
        return Err(DomainError::KindNotInGrammar(*k));
    }
    let placeholder = if config.system_kinds.contains(&ActKind::Hello) {
        ActKind::Hello
    } else {
        ActKind::Bye
    };
    ActionCatalog::build(Actor::Target, acts, placeholder, config.max_catalog)
}

fn user_catalog(config: &CooperativeConfig) -> Result<ActionCatalog, DomainError> {
    let mut acts = Vec::new();
    for d in &config.domains {
        for c in &d.constraints {
            acts.push(DialogueAct::slot(
                Actor::Opposite,
                ActKind::Inform,
                &d.qualify(&c.name),
                ANY_VALUE,
            ));
        }
        for r in &d.requests {
            acts.push(DialogueAct::slot(
                Actor::Opposite,
                ActKind::Request,
                &d.qualify(r),
                ANY_VALUE,
            ));
        }
        acts.push(DialogueAct::slot(Actor::Opposite, ActKind::Book, &d.name, ANY_VALUE));
    }
    for kind in [ActKind::Hello, ActKind::Thanks, ActKind::Bye] {
        acts.push(DialogueAct::bare(Actor::Opposite, kind));
    }
    ActionCatalog::build(Actor::Opposite, acts, ActKind::Hello, config.max_catalog)
}
