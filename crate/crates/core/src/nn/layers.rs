use rand::Rng;

use super::{Activation, Init, NnError, ParamId, ParamStore, Tape, Var};

/// Fully connected layer `act(W x + b)`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub act: Activation,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        act: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let w = store.add(&format!("{name}.w"), &[out_dim, in_dim], Init::Glorot, rng)?;
        let b = store.add(&format!("{name}.b"), &[out_dim], Init::Zeros, rng)?;
        Ok(Self {
            w,
            b,
            act,
            in_dim,
            out_dim,
        })
    }

    /// Rebinds a layer to entries already present in `store`.
    pub fn bind(store: &ParamStore, name: &str, act: Activation) -> Result<Self, NnError> {
        let (w, b) = bind_pair(store, name)?;
        let shape = store.value(w).shape();
        Ok(Self {
            w,
            b,
            act,
            in_dim: shape[1],
            out_dim: shape[0],
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, NnError> {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        dense(tape, x, w, b, self.act)
    }
}

fn bind_pair(store: &ParamStore, name: &str) -> Result<(ParamId, ParamId), NnError> {
    let w = store
        .id(&format!("{name}.w"))
        .ok_or_else(|| NnError::MissingParam(format!("{name}.w")))?;
    let b = store
        .id(&format!("{name}.b"))
        .ok_or_else(|| NnError::MissingParam(format!("{name}.b")))?;
    Ok((w, b))
}

/// `act(W x + b)` over arbitrary tape nodes.
pub fn dense(tape: &mut Tape, x: Var, w: Var, b: Var, act: Activation) -> Result<Var, NnError> {
    let wx = tape.matvec(w, x)?;
    let pre = tape.add(wx, b)?;
    Ok(tape.activate(pre, act))
}

/// Two dense layers: `out(act(hidden(x)))` with a linear output.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub hidden: Dense,
    pub out: Dense,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        act: Activation,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let hidden = Dense::new(store, &format!("{name}.l1"), in_dim, hidden_dim, act, rng)?;
        let out = Dense::new(
            store,
            &format!("{name}.l2"),
            hidden_dim,
            out_dim,
            Activation::Identity,
            rng,
        )?;
        Ok(Self { hidden, out })
    }

    pub fn bind(store: &ParamStore, name: &str, act: Activation) -> Result<Self, NnError> {
        Ok(Self {
            hidden: Dense::bind(store, &format!("{name}.l1"), act)?,
            out: Dense::bind(store, &format!("{name}.l2"), Activation::Identity)?,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out.out_dim
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var, NnError> {
        let h = self.hidden.forward(tape, x)?;
        self.out.forward(tape, h)
    }
}

/// Gated recurrent unit. Each gate reads the concatenation `[x, h]`.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub update: (ParamId, ParamId),
    pub reset: (ParamId, ParamId),
    pub candidate: (ParamId, ParamId),
}

impl GruCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let cols = input_dim + hidden_dim;
        let mut gate = |g: &str| -> Result<(ParamId, ParamId), NnError> {
            let w = store.add(&format!("{name}.{g}.w"), &[hidden_dim, cols], Init::Glorot, rng)?;
            let b = store.add(&format!("{name}.{g}.b"), &[hidden_dim], Init::Zeros, rng)?;
            Ok((w, b))
        };
        let update = gate("z")?;
        let reset = gate("r")?;
        let candidate = gate("h")?;
        Ok(Self {
            input_dim,
            hidden_dim,
            update,
            reset,
            candidate,
        })
    }

    pub fn bind(store: &ParamStore, name: &str) -> Result<Self, NnError> {
        let update = bind_pair(store, &format!("{name}.z"))?;
        let reset = bind_pair(store, &format!("{name}.r"))?;
        let candidate = bind_pair(store, &format!("{name}.h"))?;
        let shape = store.value(update.0).shape();
        let hidden_dim = shape[0];
        if shape[1] < hidden_dim {
            return Err(NnError::InvalidShape(shape.to_vec()));
        }
        Ok(Self {
            input_dim: shape[1] - hidden_dim,
            hidden_dim,
            update,
            reset,
            candidate,
        })
    }

    /// `h = (1 − z) ⊙ h_prev + z ⊙ tanh(W_h [x, r ⊙ h_prev] + b_h)`.
    pub fn step(&self, tape: &mut Tape, h_prev: Var, x: Var) -> Result<Var, NnError> {
        if tape.shape(h_prev) != [self.hidden_dim] || tape.shape(x) != [self.input_dim] {
            return Err(NnError::ShapeMismatch {
                op: "gru_step",
                left: tape.shape(h_prev).to_vec(),
                right: tape.shape(x).to_vec(),
            });
        }
        let xh = tape.concat(&[x, h_prev])?;
        let (wz, bz) = (tape.param(self.update.0), tape.param(self.update.1));
        let z = dense(tape, xh, wz, bz, Activation::Sigmoid)?;
        let (wr, br) = (tape.param(self.reset.0), tape.param(self.reset.1));
        let r = dense(tape, xh, wr, br, Activation::Sigmoid)?;
        let rh = tape.mul(r, h_prev)?;
        let xrh = tape.concat(&[x, rh])?;
        let (wh, bh) = (tape.param(self.candidate.0), tape.param(self.candidate.1));
        let cand = dense(tape, xrh, wh, bh, Activation::Tanh)?;
        let keep = tape.one_minus(z);
        let old = tape.mul(keep, h_prev)?;
        let new = tape.mul(z, cand)?;
        tape.add(old, new)
    }

    /// Runs the cell over `seq` from a zero state, returning every hidden state.
    pub fn unroll(&self, tape: &mut Tape, seq: &[Var]) -> Result<Vec<Var>, NnError> {
        let mut h = tape.input_vec(vec![0.0; self.hidden_dim]);
        let mut out = Vec::with_capacity(seq.len());
        for &x in seq {
            h = self.step(tape, h, x)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Per-position `[forward_j ∥ backward_j]` hidden states.
pub fn bigru_forward(tape: &mut Tape, seq: &[Var], fwd: &GruCell, bwd: &GruCell) -> Result<Vec<Var>, NnError> {
    if seq.is_empty() {
        return Err(NnError::EmptyInput("bigru_forward"));
    }
    let forward = fwd.unroll(tape, seq)?;
    let reversed: Vec<Var> = seq.iter().rev().copied().collect();
    let mut backward = bwd.unroll(tape, &reversed)?;
    backward.reverse();
    forward
        .into_iter()
        .zip(backward)
        .map(|(f, b)| tape.concat(&[f, b]))
        .collect()
}

/// Additive attention: `α = softmax_j(w · W_a tanh(W_h h_j))`.
#[derive(Clone, Debug)]
pub struct Attention {
    pub proj: ParamId,
    pub mix: ParamId,
    pub score: ParamId,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Self {
            proj: store.add(&format!("{name}.wh"), &[attn_dim, input_dim], Init::Glorot, rng)?,
            mix: store.add(&format!("{name}.wa"), &[attn_dim, attn_dim], Init::Glorot, rng)?,
            score: store.add(&format!("{name}.w"), &[1, attn_dim], Init::Glorot, rng)?,
        })
    }

    pub fn bind(store: &ParamStore, name: &str) -> Result<Self, NnError> {
        let get = |s: &str| {
            store
                .id(&format!("{name}.{s}"))
                .ok_or_else(|| NnError::MissingParam(format!("{name}.{s}")))
        };
        Ok(Self {
            proj: get("wh")?,
            mix: get("wa")?,
            score: get("w")?,
        })
    }
}

/// Returns `(weights, context)` with `context = Σ_j α_j h_j`.
pub fn attention(tape: &mut Tape, hiddens: &[Var], params: &Attention) -> Result<(Var, Var), NnError> {
    if hiddens.is_empty() {
        return Err(NnError::EmptyInput("attention"));
    }
    let wh = tape.param(params.proj);
    let wa = tape.param(params.mix);
    let w = tape.param(params.score);
    let mut scores = Vec::with_capacity(hiddens.len());
    for &h in hiddens {
        let p = tape.matvec(wh, h)?;
        let t = tape.tanh(p);
        let a = tape.matvec(wa, t)?;
        scores.push(tape.matvec(w, a)?);
    }
    let logits = tape.concat(&scores)?;
    let alpha = tape.softmax(logits)?;
    let mut context = None;
    for (j, &h) in hiddens.iter().enumerate() {
        let a = tape.pick(alpha, j)?;
        let term = tape.scale_by(h, a)?;
        context = Some(match context {
            None => term,
            Some(c) => tape.add(c, term)?,
        });
    }
    Ok((alpha, context.expect("non-empty")))
}
