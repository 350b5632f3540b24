use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{CooperativeConfig, DomainSpec};
use super::DomainError;

/// What the simulated user wants from one domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    pub domain: String,
    /// Unqualified constraint slot → required value, in config order.
    pub constraints: Vec<(String, String)>,
    /// Unqualified request slots, in config order.
    pub requests: Vec<String>,
    pub book: bool,
}

impl DomainGoal {
    pub fn qualified_constraints(&self) -> impl Iterator<Item = String> + '_ {
        self.constraints
            .iter()
            .map(move |(s, _)| format!("{}.{}", self.domain, s))
    }

    pub fn qualified_requests(&self) -> impl Iterator<Item = String> + '_ {
        self.requests.iter().map(move |s| format!("{}.{}", self.domain, s))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub domains: Vec<DomainGoal>,
}

impl Goal {
    pub fn validate(&self, config: &CooperativeConfig) -> Result<(), DomainError> {
        if self.domains.is_empty() {
            return Err(DomainError::InvalidGoal("goal has no domains".into()));
        }
        for g in &self.domains {
            let spec = config
                .domains
                .iter()
                .find(|d| d.name == g.domain)
                .ok_or_else(|| DomainError::InvalidGoal(format!("unknown domain {}", g.domain)))?;
            for (slot, value) in &g.constraints {
                let s = spec
                    .constraints
                    .iter()
                    .find(|c| &c.name == slot)
                    .ok_or_else(|| DomainError::InvalidGoal(format!("{}.{slot} is not a constraint", g.domain)))?;
                if !s.values.contains(value) {
                    return Err(DomainError::InvalidGoal(format!(
                        "{}.{slot} has no value {value:?}",
                        g.domain
                    )));
                }
            }
            for r in &g.requests {
                if !spec.requests.contains(r) {
                    return Err(DomainError::InvalidGoal(format!("{}.{r} is not requestable", g.domain)));
                }
                if g.constraints.iter().any(|(c, _)| c == r) {
                    return Err(DomainError::InvalidGoal(format!(
                        "{}.{r} is both constraint and request",
                        g.domain
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every goal-requested slot, qualified.
    pub fn requested_slots(&self) -> Vec<String> {
        self.domains.iter().flat_map(|d| d.qualified_requests()).collect()
    }

    pub fn domain(&self, name: &str) -> Option<&DomainGoal> {
        self.domains.iter().find(|d| d.domain == name)
    }
}

fn pick_count<R: Rng>(rng: &mut R, range: (usize, usize), available: usize) -> usize {
    let lo = range.0.min(available);
    let hi = range.1.min(available).max(lo);
    rng.random_range(lo..=hi)
}

fn sample_domain<R: Rng>(rng: &mut R, spec: &DomainSpec, config: &CooperativeConfig) -> DomainGoal {
    let nc = pick_count(rng, config.goal_constraints, spec.constraints.len());
    let mut ci = sample(rng, spec.constraints.len(), nc).into_vec();
    ci.sort_unstable();
    let constraints = ci
        .into_iter()
        .map(|i| {
            let s = &spec.constraints[i];
            let v = &s.values[rng.random_range(0..s.values.len())];
            (s.name.clone(), v.clone())
        })
        .collect::<Vec<_>>();
    let free: Vec<&String> = spec
        .requests
        .iter()
        .filter(|r| !constraints.iter().any(|(c, _)| c == *r))
        .collect();
    let nr = pick_count(rng, config.goal_requests, free.len());
    let mut ri = sample(rng, free.len(), nr).into_vec();
    ri.sort_unstable();
    DomainGoal {
        domain: spec.name.clone(),
        constraints,
        requests: ri.into_iter().map(|i| free[i].clone()).collect(),
        book: true,
    }
}

/// Random goal: a subset of domains (config order), each with sampled constraints and requests.
pub fn sample_goal<R: Rng>(rng: &mut R, config: &CooperativeConfig) -> Result<Goal, DomainError> {
    if config.domains.is_empty() {
        return Err(DomainError::InvalidConfig("no domains configured".into()));
    }
    let nd = pick_count(rng, config.goal_domains, config.domains.len()).max(1);
    let mut di = sample(rng, config.domains.len(), nd).into_vec();
    di.sort_unstable();
    let goal = Goal {
        domains: di
            .into_iter()
            .map(|i| sample_domain(rng, &config.domains[i], config))
            .collect(),
    };
    goal.validate(config)?;
    Ok(goal)
}
