use rand::Rng;

use crate::nn::{Activation, Init, Mlp, NnError, ParamId, ParamStore, Tape, Var};

/// Large negative logit offset that zeroes masked entries after softmax.
pub(crate) const MASK_PENALTY: f64 = -1e9;

/// Parameter layout of the opposite-aware Q network: a two-layer MLP over
/// `[s ∥ E°[a°']]` plus the opposite-act embedding table `E°`.
#[derive(Clone, Debug)]
pub struct QNet {
    pub mlp: Mlp,
    pub emb: ParamId,
    pub state_dim: usize,
    pub d_emb: usize,
    pub n_actions: usize,
    pub n_opposite: usize,
}

impl QNet {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dims: QDims,
        act: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mlp = Mlp::new(
            store,
            "q",
            dims.state_dim + dims.d_emb,
            dims.hidden,
            dims.n_actions,
            act,
            rng,
        )?;
        let emb = store.add("q.emb", &[dims.n_opposite, dims.d_emb], Init::Glorot, rng)?;
        Ok(Self {
            mlp,
            emb,
            state_dim: dims.state_dim,
            d_emb: dims.d_emb,
            n_actions: dims.n_actions,
            n_opposite: dims.n_opposite,
        })
    }

    pub fn bind(store: &ParamStore, act: Activation) -> Result<Self, NnError> {
        let mlp = Mlp::bind(store, "q", act)?;
        let emb = store.id("q.emb").ok_or_else(|| NnError::MissingParam("q.emb".into()))?;
        let shape = store.value(emb).shape();
        let (n_opposite, d_emb) = (shape[0], shape[1]);
        Ok(Self {
            state_dim: mlp.in_dim() - d_emb,
            n_actions: mlp.out_dim(),
            mlp,
            emb,
            d_emb,
            n_opposite,
        })
    }

    /// `E°` row for a hard estimate, or the probability-weighted mixture of rows.
    pub fn embed(&self, tape: &mut Tape, opp: OppInput<'_>) -> Result<Var, NnError> {
        let e = tape.param(self.emb);
        match opp {
            OppInput::Index(i) => tape.row(e, i),
            OppInput::Soft(p) => {
                let mut acc: Option<Var> = None;
                for (i, w) in p.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    let r = tape.row(e, i)?;
                    let r = tape.scale(r, *w);
                    acc = Some(match acc {
                        Some(a) => tape.add(a, r)?,
                        None => r,
                    });
                }
                match acc {
                    Some(a) => Ok(a),
                    None => tape.row(e, 0).map(|r| tape.scale(r, 0.0)),
                }
            }
        }
    }

    /// Augmented state node `[s ∥ E°·a°']`.
    pub fn augment(&self, tape: &mut Tape, state: Var, opp: OppInput<'_>) -> Result<Var, NnError> {
        let e = self.embed(tape, opp)?;
        tape.concat(&[state, e])
    }

    pub fn forward(&self, tape: &mut Tape, augmented: Var) -> Result<Var, NnError> {
        self.mlp.forward(tape, augmented)
    }

    /// Q-values of `state` augmented with `opp`, computed against `store`.
    pub fn q_values(&self, store: &ParamStore, state: &[f64], opp: OppInput<'_>) -> Result<Vec<f64>, NnError> {
        let mut tape = Tape::new(store);
        let s = tape.input_vec(state.to_vec());
        let aug = self.augment(&mut tape, s, opp)?;
        let q = self.forward(&mut tape, aug)?;
        Ok(tape.value(q).to_vec())
    }

    /// Augmented vector `[s ∥ E°[a°']]` under `store`.
    pub fn augmented(&self, store: &ParamStore, state: &[f64], opp: OppInput<'_>) -> Result<Vec<f64>, NnError> {
        let mut tape = Tape::new(store);
        let s = tape.input_vec(state.to_vec());
        let aug = self.augment(&mut tape, s, opp)?;
        Ok(tape.value(aug).to_vec())
    }

    /// Q-values of an already augmented vector.
    pub fn q_of_augmented(&self, store: &ParamStore, augmented: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut tape = Tape::new(store);
        let x = tape.input_vec(augmented.to_vec());
        let q = self.forward(&mut tape, x)?;
        Ok(tape.value(q).to_vec())
    }
}

/// How the estimated opposite act enters the augmentation.
#[derive(Clone, Copy, Debug)]
pub enum OppInput<'a> {
    Index(usize),
    Soft(&'a [f64]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QDims {
    pub state_dim: usize,
    pub d_emb: usize,
    pub hidden: usize,
    pub n_actions: usize,
    pub n_opposite: usize,
}

/// Q network with its own parameters `θ_Q` and the target copy `θ_Q'`.
#[derive(Clone, Debug)]
pub struct QFunction {
    pub net: QNet,
    pub store: ParamStore,
    pub target: ParamStore,
}

impl QFunction {
    pub fn new<R: Rng + ?Sized>(dims: QDims, act: Activation, rng: &mut R) -> Result<Self, NnError> {
        let mut store = ParamStore::new();
        let net = QNet::new(&mut store, dims, act, rng)?;
        let target = store.clone();
        Ok(Self { net, store, target })
    }

    pub fn from_stores(store: ParamStore, target: ParamStore, act: Activation) -> Result<Self, NnError> {
        let net = QNet::bind(&store, act)?;
        QNet::bind(&target, act)?;
        Ok(Self { net, store, target })
    }

    /// `θ_Q' ← θ_Q`.
    pub fn sync_target(&mut self) -> Result<(), NnError> {
        self.target.copy_values_from(&self.store)
    }

    pub fn q_values(&self, state: &[f64], opp: OppInput<'_>) -> Result<Vec<f64>, NnError> {
        self.net.q_values(&self.store, state, opp)
    }

    pub fn target_q_values(&self, state: &[f64], opp: OppInput<'_>) -> Result<Vec<f64>, NnError> {
        self.net.q_values(&self.target, state, opp)
    }
}

/// Opposite-behaviour estimator: MLP over `[s ∥ onehot(â)]` with a softmax head.
#[derive(Clone, Debug)]
pub struct OppositeEstimator {
    pub mlp: Mlp,
    pub store: ParamStore,
    pub state_dim: usize,
    pub n_actions: usize,
    pub n_opposite: usize,
}

impl OppositeEstimator {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        n_actions: usize,
        hidden: usize,
        n_opposite: usize,
        act: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "est", state_dim + n_actions, hidden, n_opposite, act, rng)?;
        Ok(Self {
            mlp,
            store,
            state_dim,
            n_actions,
            n_opposite,
        })
    }

    pub fn from_store(store: ParamStore, state_dim: usize, act: Activation) -> Result<Self, NnError> {
        let mlp = Mlp::bind(&store, "est", act)?;
        Ok(Self {
            n_actions: mlp.in_dim() - state_dim,
            n_opposite: mlp.out_dim(),
            mlp,
            store,
            state_dim,
        })
    }

    /// Distribution node over opposite acts for `state` and candidate `action`.
    pub fn forward(&self, tape: &mut Tape, state: Var, action: usize) -> Result<Var, NnError> {
        let mut onehot = vec![0.0; self.n_actions];
        *onehot.get_mut(action).ok_or(NnError::IndexOutOfRange {
            op: "estimator",
            index: action,
            len: self.n_actions,
        })? = 1.0;
        let a = tape.input_vec(onehot);
        let x = tape.concat(&[state, a])?;
        let logits = self.mlp.forward(tape, x)?;
        tape.softmax(logits)
    }

    pub fn distribution(&self, state: &[f64], action: usize) -> Result<Vec<f64>, NnError> {
        let mut tape = Tape::new(&self.store);
        let s = tape.input_vec(state.to_vec());
        let p = self.forward(&mut tape, s, action)?;
        Ok(tape.value(p).to_vec())
    }
}

/// Softmax of `logits / τ` with masked entries pushed to zero probability.
pub(crate) fn masked_softmax_node(
    tape: &mut Tape,
    logits: Var,
    tau: f64,
    mask: Option<&[bool]>,
) -> Result<Var, NnError> {
    let mut z = tape.scale(logits, 1.0 / tau);
    if let Some(m) = mask {
        if m.iter().any(|ok| !ok) {
            let pen = tape.input_vec(m.iter().map(|ok| if *ok { 0.0 } else { MASK_PENALTY }).collect());
            z = tape.add(z, pen)?;
        }
    }
    tape.softmax(z)
}

/// Plain-slice variant of [`masked_softmax_node`].
pub fn masked_softmax(logits: &[f64], tau: f64, mask: Option<&[bool]>) -> Result<Vec<f64>, NnError> {
    let z: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let pen = match mask {
                Some(m) if !m[i] => MASK_PENALTY,
                _ => 0.0,
            };
            q * (1.0 / tau) + pen
        })
        .collect();
    crate::nn::softmax(&z)
}
