use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PolicyError;

/// One replayed step. States are raw encodings; the augmentation is the
/// embedding row of the stored opposite-act estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub mask: Option<Vec<bool>>,
    /// Opposite-act estimate used when acting in `state`.
    pub opp_est: usize,
    /// Predicted reply distribution when the soft embedding is in use.
    pub opp_soft: Option<Vec<f64>>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_mask: Option<Vec<bool>>,
    /// Opposite-act estimate used when acting in `next_state`.
    pub next_opp_est: usize,
    pub next_opp_soft: Option<Vec<f64>>,
    pub done: bool,
    /// The reply the opposite agent actually gave, if any.
    pub opp_observed: Option<usize>,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>, PolicyError> {
        if self.items.is_empty() {
            return Err(PolicyError::EmptyBuffer);
        }
        Ok((0..n).map(|_| rng.random_range(0..self.items.len())).collect())
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>, PolicyError> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }
}

pub fn buffer_push(buf: &mut ReplayBuffer, t: Transition) {
    buf.push(t)
}

pub fn buffer_sample<'b, R: Rng>(
    buf: &'b ReplayBuffer,
    n: usize,
    rng: &mut R,
) -> Result<Vec<&'b Transition>, PolicyError> {
    buf.sample(n, rng)
}
