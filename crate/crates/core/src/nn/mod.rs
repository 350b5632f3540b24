//! Minimal reverse-mode neural substrate: tensors, a parameter store, a
//! recording tape, dense/GRU/attention layers, Adam and a finite-difference
//! gradient checker.

mod checkpoint;
mod gradcheck;
mod layers;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gradcheck::grad_check;
pub use layers::{attention, bigru_forward, Attention, Dense, GruCell, Mlp};
pub use optim::{adam_step, AdamConfig};
pub use params::{Gradients, Init, ParamEntry, ParamId, ParamStore};
pub use tape::{Activation, Tape, Var, LOG_CLAMP};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error("gradient/store size mismatch: expected {expected} entries, found {found}")]
    StoreMismatch { expected: usize, found: usize },
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("backward called without a recorded forward pass")]
    NoForwardPass,
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("non-finite gradient in parameter {0:?}")]
    NonFiniteGradient(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>, NnError> {
    if z.is_empty() {
        return Err(NnError::EmptyInput("softmax"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("softmax"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `−Σ target_k · ln(max(pred_k, 1e-12))`.
pub fn cross_entropy(target: &[f64], pred: &[f64]) -> Result<f64, NnError> {
    if target.len() != pred.len() {
        return Err(NnError::ShapeMismatch {
            op: "cross_entropy",
            left: vec![target.len()],
            right: vec![pred.len()],
        });
    }
    Ok(-target
        .iter()
        .zip(pred)
        .map(|(t, p)| t * p.max(LOG_CLAMP).ln())
        .sum::<f64>())
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmax restricted to positions where `mask` is true. Falls back to the
/// unmasked argmax when nothing is allowed.
pub fn masked_argmax(values: &[f64], mask: Option<&[bool]>) -> usize {
    let Some(mask) = mask else {
        return argmax(values);
    };
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if !mask.get(i).copied().unwrap_or(false) {
            continue;
        }
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best.unwrap_or_else(|| argmax(values))
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_fixtures() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 1000.0, 1000.0]).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        // e^z / Σ e^z evaluated independently
        let z = [1.0f64, 2.0, 3.0];
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        let expected: Vec<f64> = z.iter().map(|v| v.exp() / denom).collect();
        let got = softmax(&z).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-15);
        }
        for (g, e) in got.iter().zip([0.09003, 0.24473, 0.66524]) {
            assert!((g - e).abs() < 5e-6);
        }
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn cross_entropy_fixtures() {
        assert_eq!(cross_entropy(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        let ce = cross_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((ce - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[1.0], &[0.5, 0.5]).is_err());
        // clamp keeps the loss finite on a zero prediction
        assert!(cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.25; 4]), 0);
        assert_eq!(masked_argmax(&[5.0, 1.0, 1.0], Some(&[false, true, true])), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
        }

        proptest! {
            #[test]
            fn softmax_is_a_shift_invariant_simplex(
                z in prop::collection::vec(-15.0f64..15.0, 1..12),
                c in -100.0f64..100.0,
            ) {
                let p = softmax(&z).unwrap();
                let total: f64 = p.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|v| *v > 0.0 && *v < 1.0 || z.len() == 1));
                let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
                let q = softmax(&shifted).unwrap();
                for (a, b) in p.iter().zip(&q) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }

            #[test]
            fn gibbs_inequality((p, q) in (2usize..8).prop_flat_map(|n| (dist(n), dist(n)))) {
                let cross = cross_entropy(&p, &q).unwrap();
                let own = cross_entropy(&p, &p).unwrap();
                prop_assert!(cross >= own - 1e-12);
                prop_assert!(own >= 0.0);
            }
        }
    }
}
