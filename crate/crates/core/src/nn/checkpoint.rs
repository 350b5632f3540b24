//! Checkpoint format: `manifest.json` plus a little-endian `params.bin` blob.
//!
//! The manifest maps every tensor name to `{shape, dtype, offset}`. Values and
//! both Adam moments are stored; moments use the `#m1` / `#m2` suffixes.
//! Tensors are laid out back to back in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{ParamEntry, ParamStore, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";
const FORMAT: &str = "oppa-checkpoint";
const SINGLE_STORE: &str = "params";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),
    #[error("shape mismatch for {name}: manifest shape {shape:?} needs {expected} bytes, blob holds {found}")]
    ShapeMismatch {
        name: String,
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("truncated blob: manifest declares {expected} bytes, file has {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported dtype {dtype:?} for {name}")]
    UnsupportedDtype { name: String, dtype: String },
    #[error("missing store {0:?}")]
    MissingStore(String),
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    shape: Vec<usize>,
    dtype: String,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    blob_bytes: usize,
    step_counts: Map<String, Value>,
    #[serde(default)]
    meta: Value,
    tensors: Map<String, Value>,
}

/// A set of named parameter stores with free-form metadata.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: Value,
    pub stores: Vec<(String, ParamStore)>,
}

impl Checkpoint {
    pub fn new(meta: Value) -> Self {
        Self {
            meta,
            stores: Vec::new(),
        }
    }

    pub fn with_store(mut self, name: &str, store: ParamStore) -> Self {
        self.stores.push((name.to_string(), store));
        self
    }

    pub fn store(&self, name: &str) -> Result<&ParamStore, CheckpointError> {
        self.stores
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| CheckpointError::MissingStore(name.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<(), CheckpointError> {
        fs::create_dir_all(dir)?;
        let mut blob: Vec<u8> = Vec::new();
        let mut tensors = Map::new();
        let mut step_counts = Map::new();
        for (store_name, store) in &self.stores {
            step_counts.insert(store_name.clone(), Value::from(store.step_count));
            for e in store.entries() {
                let base = format!("{store_name}/{}", e.name);
                for (suffix, t) in [("", &e.value), ("#m1", &e.moment1), ("#m2", &e.moment2)] {
                    let rec = TensorRecord {
                        shape: t.shape().to_vec(),
                        dtype: "f64".into(),
                        offset: blob.len(),
                    };
                    for v in t.data() {
                        blob.extend_from_slice(&v.to_le_bytes());
                    }
                    tensors.insert(
                        format!("{base}{suffix}"),
                        serde_json::to_value(rec).expect("record serializes"),
                    );
                }
            }
        }
        let manifest = Manifest {
            format: FORMAT.into(),
            version: 1,
            blob_bytes: blob.len(),
            step_counts,
            meta: self.meta.clone(),
            tensors,
        };
        let mut text =
            serde_json::to_vec_pretty(&manifest).map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
        text.push(b'\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        fs::write(dir.join(BLOB_FILE), blob)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read(dir.join(MANIFEST_FILE))?;
        let manifest: Manifest =
            serde_json::from_slice(&text).map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
        if manifest.format != FORMAT {
            return Err(CheckpointError::CorruptManifest(format!(
                "unknown format {:?}",
                manifest.format
            )));
        }
        let blob = fs::read(dir.join(BLOB_FILE))?;
        if blob.len() < manifest.blob_bytes {
            return Err(CheckpointError::Truncated {
                expected: manifest.blob_bytes,
                found: blob.len(),
            });
        }

        let mut records = Vec::with_capacity(manifest.tensors.len());
        for (name, raw) in &manifest.tensors {
            let rec: TensorRecord = serde_json::from_value(raw.clone())
                .map_err(|e| CheckpointError::CorruptManifest(format!("{name}: {e}")))?;
            if rec.dtype != "f64" {
                return Err(CheckpointError::UnsupportedDtype {
                    name: name.clone(),
                    dtype: rec.dtype,
                });
            }
            records.push((name.clone(), rec));
        }
        let mut tensors = Vec::with_capacity(records.len());
        for (i, (name, rec)) in records.iter().enumerate() {
            let end = records.get(i + 1).map(|(_, r)| r.offset).unwrap_or(manifest.blob_bytes);
            let expected = rec.shape.iter().product::<usize>() * 8;
            let found = end.saturating_sub(rec.offset);
            if end < rec.offset || expected != found || rec.shape.contains(&0) {
                return Err(CheckpointError::ShapeMismatch {
                    name: name.clone(),
                    shape: rec.shape.clone(),
                    expected,
                    found,
                });
            }
            let data = blob[rec.offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let t = Tensor::new(rec.shape.clone(), data)
                .map_err(|e| CheckpointError::CorruptManifest(format!("{name}: {e}")))?;
            tensors.push((name.clone(), t));
        }

        let mut stores: Vec<(String, ParamStore)> = Vec::new();
        let mut it = tensors.into_iter();
        while let Some((name, value)) = it.next() {
            let (store_name, param) = name
                .split_once('/')
                .ok_or_else(|| CheckpointError::CorruptManifest(format!("bad name {name:?}")))?;
            let mut moment = |suffix: &str| -> Result<Tensor, CheckpointError> {
                match it.next() {
                    Some((n, t)) if n == format!("{name}{suffix}") => {
                        if t.shape() != value.shape() {
                            return Err(CheckpointError::ShapeMismatch {
                                name: n,
                                shape: t.shape().to_vec(),
                                expected: value.len() * 8,
                                found: t.len() * 8,
                            });
                        }
                        Ok(t)
                    }
                    _ => Err(CheckpointError::CorruptManifest(format!("missing {name}{suffix}"))),
                }
            };
            let moment1 = moment("#m1")?;
            let moment2 = moment("#m2")?;
            if stores.last().map(|(n, _)| n.as_str()) != Some(store_name) {
                if stores.iter().any(|(n, _)| n == store_name) {
                    return Err(CheckpointError::CorruptManifest(format!(
                        "store {store_name:?} is not contiguous"
                    )));
                }
                stores.push((store_name.to_string(), ParamStore::new()));
            }
            let store = &mut stores.last_mut().expect("pushed above").1;
            store
                .insert_entry(ParamEntry {
                    name: param.to_string(),
                    grad: Tensor::zeros(value.shape()),
                    value,
                    moment1,
                    moment2,
                })
                .map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
        }
        for (name, count) in &manifest.step_counts {
            let count = count
                .as_u64()
                .ok_or_else(|| CheckpointError::CorruptManifest(format!("step count {name}")))?;
            match stores.iter_mut().find(|(n, _)| n == name) {
                Some((_, s)) => s.step_count = count,
                None => {
                    let mut s = ParamStore::new();
                    s.step_count = count;
                    stores.push((name.clone(), s));
                }
            }
        }
        Ok(Self {
            meta: manifest.meta,
            stores,
        })
    }
}

pub fn save_checkpoint(store: &ParamStore, dir: &Path) -> Result<(), CheckpointError> {
    Checkpoint::new(Value::Null)
        .with_store(SINGLE_STORE, store.clone())
        .save(dir)
}

pub fn load_checkpoint(dir: &Path) -> Result<ParamStore, CheckpointError> {
    let mut ckpt = Checkpoint::load(dir)?;
    let idx = ckpt
        .stores
        .iter()
        .position(|(n, _)| n == SINGLE_STORE)
        .ok_or_else(|| CheckpointError::MissingStore(SINGLE_STORE.into()))?;
    Ok(ckpt.stores.swap_remove(idx).1)
}
