use rand::Rng;
use serde::{Deserialize, Serialize};

use super::act::{Actor, ItemCounts};
use super::config::NegotiationConfig;
use super::DomainError;

/// Negotiation item pool and each agent's private per-item values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub item_counts: ItemCounts,
    pub values_a: ItemCounts,
    pub values_b: ItemCounts,
}

/// Σ count·value over item types.
pub fn total_value(counts: &ItemCounts, values: &ItemCounts) -> u32 {
    counts.iter().zip(values).map(|(c, v)| c * v).sum()
}

impl Scenario {
    /// Values of agent `a` (target) or `b` (opposite).
    pub fn values(&self, actor: Actor) -> &ItemCounts {
        match actor {
            Actor::Target => &self.values_a,
            Actor::Opposite => &self.values_b,
        }
    }

    pub fn validate(&self, config: &NegotiationConfig) -> Result<(), DomainError> {
        if self.item_counts.iter().all(|c| *c == 0) {
            return Err(DomainError::InvalidScenario("no items".into()));
        }
        for (i, (c, cap)) in self.item_counts.iter().zip(&config.item_caps).enumerate() {
            if c > cap {
                return Err(DomainError::InvalidScenario(format!(
                    "item {i} count {c} exceeds cap {cap}"
                )));
            }
        }
        for (name, v) in [("a", &self.values_a), ("b", &self.values_b)] {
            let t = total_value(&self.item_counts, v);
            if t != config.total_value {
                return Err(DomainError::InvalidScenario(format!(
                    "agent {name} totals {t}, expected {}",
                    config.total_value
                )));
            }
        }
        Ok(())
    }

    /// Agent A and B seen from the other side.
    pub fn swapped(&self) -> Self {
        Self {
            item_counts: self.item_counts,
            values_a: self.values_b,
            values_b: self.values_a,
        }
    }
}

/// All value vectors with Σ count·value == total; zero-count types get value 0.
pub fn value_vectors(counts: &ItemCounts, total: u32) -> Vec<ItemCounts> {
    let mut out = Vec::new();
    let range = |i: usize| total.checked_div(counts[i]).unwrap_or(0);
    for v0 in 0..=range(0) {
        for v1 in 0..=range(1) {
            for v2 in 0..=range(2) {
                let v = [v0, v1, v2];
                if total_value(counts, &v) == total {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Every feasible `(counts, value vectors)` pair under the config.
#[derive(Clone, Debug)]
pub struct ScenarioSpace {
    pools: Vec<(ItemCounts, Vec<ItemCounts>)>,
    /// Cumulative number of scenarios (ordered value pairs) per pool.
    cumulative: Vec<u64>,
}

impl ScenarioSpace {
    pub fn new(config: &NegotiationConfig) -> Result<Self, DomainError> {
        let caps = config.item_caps;
        let mut pools = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0u64;
        for c0 in 0..=caps[0] {
            for c1 in 0..=caps[1] {
                for c2 in 0..=caps[2] {
                    let counts = [c0, c1, c2];
                    if counts.iter().sum::<u32>() < config.min_total_items.max(1) {
                        continue;
                    }
                    let vs = value_vectors(&counts, config.total_value);
                    if vs.is_empty() {
                        continue;
                    }
                    acc += (vs.len() * vs.len()) as u64;
                    cumulative.push(acc);
                    pools.push((counts, vs));
                }
            }
        }
        if pools.is_empty() {
            return Err(DomainError::NoFeasibleScenario);
        }
        Ok(Self { pools, cumulative })
    }

    pub fn len(&self) -> u64 {
        *self.cumulative.last().expect("non-empty")
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    /// Uniform draw over all feasible scenarios.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Scenario {
        let k = rng.random_range(0..self.len());
        let p = self.cumulative.partition_point(|&c| c <= k);
        let before = if p == 0 { 0 } else { self.cumulative[p - 1] };
        let (counts, vs) = &self.pools[p];
        let r = (k - before) as usize;
        Scenario {
            item_counts: *counts,
            values_a: vs[r / vs.len()],
            values_b: vs[r % vs.len()],
        }
    }
}

/// The worked example shipped as a fixture: 3 books, 1 hat, 1 ball.
pub fn reference_scenario() -> Scenario {
    Scenario {
        item_counts: [3, 1, 1],
        values_a: [0, 6, 4],
        values_b: [1, 4, 3],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_scenario_is_normalized() {
        let s = reference_scenario();
        assert_eq!(total_value(&s.item_counts, &s.values_a), 10);
        assert_eq!(total_value(&s.item_counts, &s.values_b), 10);
        s.validate(&NegotiationConfig::default()).unwrap();
    }

    #[test]
    fn space_sampling_is_uniform_over_enumeration() {
        let cfg = NegotiationConfig {
            item_caps: [1, 1, 1],
            total_value: 2,
            ..Default::default()
        };
        let space = ScenarioSpace::new(&cfg).unwrap();
        // Independent count: brute force over all count/value triples.
        let mut brute = 0u64;
        for c in 0..8u32 {
            let counts = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            if counts == [0, 0, 0] {
                continue;
            }
            let mut n = 0u64;
            for v in 0..27u32 {
                let v = [v % 3, (v / 3) % 3, v / 9];
                if counts.iter().zip(&v).all(|(c, v)| *c > 0 || *v == 0) && total_value(&counts, &v) == 2 {
                    n += 1;
                }
            }
            brute += n * n;
        }
        assert_eq!(space.len(), brute);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            space.sample(&mut rng).validate(&cfg).unwrap();
        }
    }
}
