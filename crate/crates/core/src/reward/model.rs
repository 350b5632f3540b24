use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ItemCounts, NUM_ITEMS};
use crate::nn::{
    adam_step, argmax, attention, bigru_forward, one_hot, Activation, AdamConfig, Attention, Dense, GruCell, Init,
    NnError, ParamId, ParamStore, Tape, Var,
};

use super::vocab::SessionTokens;
use super::RewardError;

/// Sizes and optimizer settings of the outcome predictor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardModelConfig {
    pub d_word: usize,
    /// Word-level GRU producing the per-token context `h_j`.
    pub gru_w: usize,
    /// Per-direction hidden size of the session BiGRU.
    pub gru_o: usize,
    /// Goal GRU hidden size.
    pub gru_g: usize,
    pub attn: usize,
    pub d_session: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub holdout_frac: f64,
}

impl Default for RewardModelConfig {
    fn default() -> Self {
        Self {
            d_word: 64,
            gru_w: 128,
            gru_o: 256,
            gru_g: 64,
            attn: 64,
            d_session: 256,
            lr: 1e-3,
            epochs: 10,
            batch_size: 16,
            holdout_frac: 0.2,
        }
    }
}

/// BiGRU-with-attention session encoder and one softmax classifier per issue.
#[derive(Clone, Debug)]
pub struct RewardModel {
    pub config: RewardModelConfig,
    pub caps: ItemCounts,
    pub store: ParamStore,
    emb: ParamId,
    gru_w: GruCell,
    fwd: GruCell,
    bwd: GruCell,
    attn: Attention,
    gru_g: GruCell,
    ws: Dense,
    heads: Vec<Dense>,
}

/// Forward-pass nodes of one session.
pub struct Encoded {
    pub session: Var,
    pub alpha: Var,
    /// BiGRU states `h_j^o`.
    pub hiddens: Vec<Var>,
}

impl RewardModel {
    pub fn new<R: Rng>(
        vocab_size: usize,
        caps: ItemCounts,
        config: RewardModelConfig,
        rng: &mut R,
    ) -> Result<Self, RewardError> {
        let c = &config;
        let mut store = ParamStore::new();
        let emb = store.add("rm.emb", &[vocab_size, c.d_word], Init::Glorot, rng)?;
        let gru_w = GruCell::new(&mut store, "rm.gru_w", c.d_word, c.gru_w, rng)?;
        let fwd = GruCell::new(&mut store, "rm.gru_o.f", c.d_word + c.gru_w, c.gru_o, rng)?;
        let bwd = GruCell::new(&mut store, "rm.gru_o.b", c.d_word + c.gru_w, c.gru_o, rng)?;
        let attn = Attention::new(&mut store, "rm.attn", 2 * c.gru_o, c.attn, rng)?;
        let gru_g = GruCell::new(&mut store, "rm.gru_g", c.d_word, c.gru_g, rng)?;
        let ws = Dense::new(
            &mut store,
            "rm.ws",
            c.gru_g + 2 * c.gru_o,
            c.d_session,
            Activation::Tanh,
            rng,
        )?;
        let mut heads = Vec::with_capacity(NUM_ITEMS);
        for (i, cap) in caps.iter().enumerate() {
            heads.push(Dense::new(
                &mut store,
                &format!("rm.issue{i}"),
                c.d_session,
                *cap as usize + 1,
                Activation::Identity,
                rng,
            )?);
        }
        Ok(Self {
            config,
            caps,
            store,
            emb,
            gru_w,
            fwd,
            bwd,
            attn,
            gru_g,
            ws,
            heads,
        })
    }

    /// Rebinds a model to a loaded parameter store.
    pub fn from_store(store: ParamStore, caps: ItemCounts, config: RewardModelConfig) -> Result<Self, RewardError> {
        let emb = store
            .id("rm.emb")
            .ok_or_else(|| NnError::MissingParam("rm.emb".into()))?;
        let heads = (0..NUM_ITEMS)
            .map(|i| Dense::bind(&store, &format!("rm.issue{i}"), Activation::Identity))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            gru_w: GruCell::bind(&store, "rm.gru_w")?,
            fwd: GruCell::bind(&store, "rm.gru_o.f")?,
            bwd: GruCell::bind(&store, "rm.gru_o.b")?,
            attn: Attention::bind(&store, "rm.attn")?,
            gru_g: GruCell::bind(&store, "rm.gru_g")?,
            ws: Dense::bind(&store, "rm.ws", Activation::Tanh)?,
            heads,
            emb,
            config,
            caps,
            store,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.store.value(self.emb).shape()[0]
    }

    fn embed(&self, tape: &mut Tape, tokens: &[usize]) -> Result<Vec<Var>, RewardError> {
        let e = tape.param(self.emb);
        tokens
            .iter()
            .map(|t| tape.row(e, *t).map_err(RewardError::from))
            .collect()
    }

    /// `h^s = tanh(W^s [h^g ∥ Σ_j α_j h_j^o])`.
    pub fn encode_session(&self, tape: &mut Tape, s: &SessionTokens) -> Result<Encoded, RewardError> {
        if s.tokens.is_empty() || s.goal.is_empty() {
            return Err(RewardError::EmptySession);
        }
        let xs = self.embed(tape, &s.tokens)?;
        let hw = self.gru_w.unroll(tape, &xs)?;
        let inputs = xs
            .iter()
            .zip(&hw)
            .map(|(x, h)| tape.concat(&[*x, *h]))
            .collect::<Result<Vec<_>, _>>()?;
        let hiddens = bigru_forward(tape, &inputs, &self.fwd, &self.bwd)?;
        let (alpha, context) = attention(tape, &hiddens, &self.attn)?;
        let gs = self.embed(tape, &s.goal)?;
        let hg = *self.gru_g.unroll(tape, &gs)?.last().expect("non-empty goal");
        let joined = tape.concat(&[hg, context])?;
        let session = self.ws.forward(tape, joined)?;
        Ok(Encoded {
            session,
            alpha,
            hiddens,
        })
    }

    /// One softmax node per issue.
    pub fn predict_nodes(&self, tape: &mut Tape, session: Var) -> Result<Vec<Var>, RewardError> {
        self.heads
            .iter()
            .map(|h| {
                let z = h.forward(tape, session)?;
                tape.softmax(z).map_err(RewardError::from)
            })
            .collect()
    }

    pub fn predict_issues(&self, s: &SessionTokens) -> Result<Vec<Vec<f64>>, RewardError> {
        let mut tape = Tape::new(&self.store);
        let enc = self.encode_session(&mut tape, s)?;
        let nodes = self.predict_nodes(&mut tape, enc.session)?;
        Ok(nodes.iter().map(|n| tape.value(*n).to_vec()).collect())
    }

    /// `Σ_i CE(onehot(o_i), p_i)`.
    pub fn loss(&self, tape: &mut Tape, s: &SessionTokens, outcome: &ItemCounts) -> Result<Var, RewardError> {
        let enc = self.encode_session(tape, s)?;
        let nodes = self.predict_nodes(tape, enc.session)?;
        let mut terms = Vec::with_capacity(NUM_ITEMS);
        for (i, p) in nodes.into_iter().enumerate() {
            let classes = self.caps[i] as usize + 1;
            let o = outcome[i] as usize;
            if o >= classes {
                return Err(RewardError::IssueMismatch(format!("issue {i}: class {o} of {classes}")));
            }
            terms.push(tape.cross_entropy(&one_hot(o, classes), p)?);
        }
        let c = tape.concat(&terms)?;
        Ok(tape.sum(c))
    }
}

/// Per-issue argmax; ties resolve to the lowest class.
pub fn decode_output(dists: &[Vec<f64>]) -> Vec<u32> {
    dists.iter().map(|d| argmax(d) as u32).collect()
}

/// Accuracy summary of a trained predictor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub train: usize,
    pub heldout: usize,
    pub final_loss: f64,
    pub issue_accuracy: Vec<f64>,
    pub exact_match: f64,
    pub train_issue_accuracy: Vec<f64>,
}

/// `(per-issue accuracy, exact-match rate)` of `model` on `data`.
pub fn accuracy(model: &RewardModel, data: &[(SessionTokens, ItemCounts)]) -> Result<(Vec<f64>, f64), RewardError> {
    let mut hits = [0usize; NUM_ITEMS];
    let mut exact = 0usize;
    for (s, o) in data {
        let pred = decode_output(&model.predict_issues(s)?);
        let mut all = true;
        for i in 0..NUM_ITEMS {
            if pred[i] == o[i] {
                hits[i] += 1;
            } else {
                all = false;
            }
        }
        exact += usize::from(all);
    }
    let n = data.len().max(1) as f64;
    Ok((hits.iter().map(|h| *h as f64 / n).collect(), exact as f64 / n))
}

/// Adam on the summed per-issue cross-entropy, with a held-out split.
pub fn train_reward_model<R: Rng>(
    model: &mut RewardModel,
    corpus: &[(SessionTokens, ItemCounts)],
    rng: &mut R,
) -> Result<RewardReport, RewardError> {
    if corpus.is_empty() {
        return Err(RewardError::EmptyCorpus);
    }
    let cfg = model.config.clone();
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(rng);
    let n_hold = (((corpus.len() as f64) * cfg.holdout_frac).round() as usize).min(corpus.len() - 1);
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let train: Vec<(SessionTokens, ItemCounts)> = train_idx.iter().map(|i| corpus[*i].clone()).collect();
    let hold: Vec<(SessionTokens, ItemCounts)> = hold_idx.iter().map(|i| corpus[*i].clone()).collect();
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut idx: Vec<usize> = (0..train.len()).collect();
    let mut last = 0.0;
    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        let mut total = 0.0;
        for chunk in idx.chunks(cfg.batch_size.max(1)) {
            let (loss, grads) = {
                let mut tape = Tape::new(&model.store);
                let mut terms = Vec::with_capacity(chunk.len());
                for i in chunk {
                    let (s, o) = &train[*i];
                    terms.push(model.loss(&mut tape, s, o)?);
                }
                let l = tape.mean(&terms)?;
                (tape.scalar(l), tape.backward(l)?)
            };
            total += loss * chunk.len() as f64;
            model.store.zero_grad();
            model.store.accumulate(&grads)?;
            adam_step(&mut model.store, &adam)?;
        }
        last = total / train.len() as f64;
    }
    let (train_acc, _) = accuracy(model, &train)?;
    let (issue_accuracy, exact_match) = accuracy(model, if hold.is_empty() { &train } else { &hold })?;
    Ok(RewardReport {
        train: train.len(),
        heldout: hold.len(),
        final_loss: last,
        issue_accuracy,
        exact_match,
        train_issue_accuracy: train_acc,
    })
}
