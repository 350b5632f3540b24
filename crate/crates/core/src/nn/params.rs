use std::collections::HashMap;

use rand::Rng;

use super::{NnError, Tensor};

/// Index of an entry inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// One named parameter with its gradient and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub moment1: Tensor,
    pub moment2: Tensor,
}

/// How a freshly added parameter is filled.
#[derive(Clone, Copy, Debug)]
pub enum Init {
    Zeros,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Uniform(f64),
}

/// Ordered collection of named parameters. Iteration order is insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
    pub step_count: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: Rng + ?Sized>(
        &mut self,
        name: &str,
        shape: &[usize],
        init: Init,
        rng: &mut R,
    ) -> Result<ParamId, NnError> {
        let mut value = Tensor::zeros(shape);
        if value.is_empty() {
            return Err(NnError::InvalidShape(shape.to_vec()));
        }
        match init {
            Init::Zeros => {}
            Init::Glorot => {
                let (fan_out, fan_in) = match shape {
                    [n] => (*n, 1),
                    [r, c] => (*r, *c),
                    _ => (shape[0], shape[1..].iter().product()),
                };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in value.data_mut() {
                    *v = rng.random_range(-limit..=limit);
                }
            }
            Init::Uniform(limit) => {
                for v in value.data_mut() {
                    *v = rng.random_range(-limit..=limit);
                }
            }
        }
        self.insert(name, value)
    }

    /// Adds an entry with an explicit initial value and zeroed grad/moments.
    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId, NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let zeros = Tensor::zeros(value.shape());
        let id = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            grad: zeros.clone(),
            moment1: zeros.clone(),
            moment2: zeros,
            value,
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    /// Restores a full entry, used by checkpoint loading.
    pub(crate) fn insert_entry(&mut self, entry: ParamEntry) -> Result<ParamId, NnError> {
        if self.index.contains_key(&entry.name) {
            return Err(NnError::DuplicateParam(entry.name));
        }
        let id = self.entries.len();
        self.index.insert(entry.name.clone(), id);
        self.entries.push(entry);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entry_mut(&mut self, id: ParamId) -> &mut ParamEntry {
        &mut self.entries[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Adds `grads` into the stored gradient accumulators.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), NnError> {
        if grads.slots.len() != self.entries.len() {
            return Err(NnError::StoreMismatch {
                expected: self.entries.len(),
                found: grads.slots.len(),
            });
        }
        for (entry, slot) in self.entries.iter_mut().zip(&grads.slots) {
            if let Some(g) = slot {
                for (acc, v) in entry.grad.data_mut().iter_mut().zip(g) {
                    *acc += v;
                }
            }
        }
        Ok(())
    }

    /// Overwrites every value with the matching value of `other`; shapes and
    /// names must agree. Gradients and moments of `self` are left alone.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<(), NnError> {
        if other.entries.len() != self.entries.len() {
            return Err(NnError::StoreMismatch {
                expected: self.entries.len(),
                found: other.entries.len(),
            });
        }
        for (dst, src) in self.entries.iter_mut().zip(&other.entries) {
            if dst.name != src.name || dst.value.shape() != src.value.shape() {
                return Err(NnError::ShapeMismatch {
                    op: "copy_values_from",
                    left: dst.value.shape().to_vec(),
                    right: src.value.shape().to_vec(),
                });
            }
            dst.value.data_mut().copy_from_slice(src.value.data());
        }
        Ok(())
    }

    /// True when every value is bitwise equal to `other`'s.
    pub fn values_bit_equal(&self, other: &ParamStore) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.value.shape() == b.value.shape()
                    && a.value
                        .data()
                        .iter()
                        .zip(b.value.data())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Per-parameter gradients produced by one backward pass.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub(crate) slots: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots.get(id.0).and_then(|s| s.as_deref())
    }

    /// Gradient of `id`, or zeros of `len` if the parameter was not reached.
    pub fn get_or_zero(&self, id: ParamId, len: usize) -> Vec<f64> {
        self.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len])
    }
}
