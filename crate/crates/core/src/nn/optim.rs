use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update from the accumulated gradients.
///
/// Gradients are left in place; the caller zeroes them. If any gradient is
/// non-finite nothing is modified.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<(), NnError> {
    for e in store.entries() {
        if !e.grad.all_finite() {
            return Err(NnError::NonFiniteGradient(e.name.clone()));
        }
    }
    store.step_count += 1;
    let t = store.step_count as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let e = store.entry_mut(id);
        let g = e.grad.data();
        let m = e.moment1.data_mut();
        for (mi, gi) in m.iter_mut().zip(g) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
        }
        let v = e.moment2.data_mut();
        for (vi, gi) in v.iter_mut().zip(e.grad.data()) {
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
        }
        let (m, v) = (e.moment1.data(), e.moment2.data());
        for ((x, mi), vi) in e.value.data_mut().iter_mut().zip(m).zip(v) {
            let m_hat = mi / c1;
            let v_hat = vi / c2;
            *x -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
