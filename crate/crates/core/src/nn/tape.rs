//! Tape-based reverse-mode differentiation over a small, fixed op vocabulary.
//!
//! A [`Tape`] borrows one [`ParamStore`] immutably while the forward pass is
//! recorded. [`Tape::backward`] returns [`Gradients`] which the caller adds
//! into the store with [`ParamStore::accumulate`] once the tape is dropped.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::{Gradients, NnError, ParamId, ParamStore, Tensor};

/// Lower clamp applied before every `log`.
pub const LOG_CLAMP: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Softmax(Var),
    Log(Var),
    Sum(Var),
    Pick(Var, usize),
    Row(Var, usize),
}

struct Node<'s> {
    value: Cow<'s, Tensor>,
    op: Op,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node<'s>>,
    param_nodes: Vec<Option<Var>>,
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), NnError> {
    if a.shape() != b.shape() {
        return Err(NnError::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add_into(acc: &mut Option<Vec<f64>>, len: usize, f: impl Fn(usize) -> f64) {
    let buf = acc.get_or_insert_with(|| vec![0.0; len]);
    for (i, v) in buf.iter_mut().enumerate() {
        *v += f(i);
    }
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(256),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn get(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.get(v).data()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.get(v).shape()
    }

    pub fn tensor(&self, v: Var) -> &Tensor {
        self.get(v)
    }

    /// First element of a node, for scalar losses.
    pub fn scalar(&self, v: Var) -> f64 {
        self.get(v).data()[0]
    }

    /// Constant leaf; receives no gradient.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn input_vec(&mut self, data: Vec<f64>) -> Var {
        self.input(Tensor::vector(data))
    }

    /// Leaf bound to a stored parameter. Repeated calls reuse one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Cow::Borrowed(self.store.value(id)),
            op: Op::Param(id),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// `W x` for a `[rows, cols]` matrix and a length-`cols` vector.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var, NnError> {
        let (wt, xt) = (self.get(w), self.get(x));
        if !wt.is_matrix() || !xt.is_vector() || wt.cols() != xt.len() {
            return Err(NnError::ShapeMismatch {
                op: "matvec",
                left: wt.shape().to_vec(),
                right: xt.shape().to_vec(),
            });
        }
        let cols = wt.cols();
        let xd = xt.data();
        let out: Vec<f64> = wt
            .data()
            .chunks_exact(cols)
            .map(|row| row.iter().zip(xd).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, NnError> {
        let (at, bt) = (self.get(a), self.get(b));
        check_same(name, at, bt)?;
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| f(*x, *y)).collect();
        let t = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(t, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let at = self.get(a);
        let data = at.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(at.shape().to_vec(), data).expect("shape preserved");
        self.push(t, op)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    /// Vector times a scalar node.
    pub fn scale_by(&mut self, v: Var, s: Var) -> Result<Var, NnError> {
        let st = self.get(s);
        if st.len() != 1 {
            return Err(NnError::ShapeMismatch {
                op: "scale_by",
                left: self.get(v).shape().to_vec(),
                right: st.shape().to_vec(),
            });
        }
        let c = st.data()[0];
        Ok(self.map(v, |x| x * c, Op::ScaleBy(v, s)))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Var {
        match act {
            Activation::Identity => a,
            Activation::Tanh => self.tanh(a),
            Activation::Relu => self.relu(a),
            Activation::Sigmoid => self.sigmoid(a),
        }
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        if parts.is_empty() {
            return Err(NnError::EmptyInput("concat"));
        }
        let mut data = Vec::new();
        for &p in parts {
            let t = self.get(p);
            if !t.is_vector() {
                return Err(NnError::ShapeMismatch {
                    op: "concat",
                    left: vec![data.len()],
                    right: t.shape().to_vec(),
                });
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, NnError> {
        let at = self.get(a);
        if !at.is_vector() || at.is_empty() {
            return Err(NnError::EmptyInput("softmax"));
        }
        let out = super::softmax(at.data())?;
        Ok(self.push(Tensor::vector(out), Op::Softmax(a)))
    }

    /// Natural log with inputs clamped to at least [`LOG_CLAMP`].
    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(LOG_CLAMP).ln(), Op::Log(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.get(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var, NnError> {
        let at = self.get(a);
        if index >= at.len() {
            return Err(NnError::IndexOutOfRange {
                op: "pick",
                index,
                len: at.len(),
            });
        }
        let v = at.data()[index];
        Ok(self.push(Tensor::scalar(v), Op::Pick(a, index)))
    }

    /// Row `index` of a matrix as a vector (embedding lookup).
    pub fn row(&mut self, m: Var, index: usize) -> Result<Var, NnError> {
        let mt = self.get(m);
        if !mt.is_matrix() || index >= mt.rows() {
            return Err(NnError::IndexOutOfRange {
                op: "row",
                index,
                len: mt.rows(),
            });
        }
        let c = mt.cols();
        let data = mt.data()[index * c..(index + 1) * c].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Row(m, index)))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    /// `−Σ target_k · log(pred_k)` against a constant target distribution.
    pub fn cross_entropy(&mut self, target: &[f64], pred: Var) -> Result<Var, NnError> {
        if target.len() != self.get(pred).len() {
            return Err(NnError::ShapeMismatch {
                op: "cross_entropy",
                left: vec![target.len()],
                right: self.get(pred).shape().to_vec(),
            });
        }
        let t = self.input_vec(target.to_vec());
        let lp = self.log(pred);
        let d = self.dot(t, lp)?;
        Ok(self.scale(d, -1.0))
    }

    /// Arithmetic mean of scalar nodes.
    pub fn mean(&mut self, scalars: &[Var]) -> Result<Var, NnError> {
        if scalars.is_empty() {
            return Err(NnError::EmptyInput("mean"));
        }
        let c = self.concat(scalars)?;
        let s = self.sum(c);
        Ok(self.scale(s, 1.0 / scalars.len() as f64))
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(NnError::NoForwardPass);
        }
        let lt = self.get(loss);
        if lt.len() != 1 {
            return Err(NnError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(vec![1.0]);
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; self.store.len()];

        for k in (0..=loss.0).rev() {
            let Some(g) = adj[k].take() else { continue };
            let node = &self.nodes[k];
            let y = node.value.data();
            match &node.op {
                Op::Input => {}
                Op::Param(id) => slots[id.0] = Some(g),
                Op::MatVec(w, x) => {
                    let (wt, xt) = (self.get(*w), self.get(*x));
                    let cols = wt.cols();
                    let (wd, xd) = (wt.data(), xt.data());
                    {
                        let gw = adj[w.0].get_or_insert_with(|| vec![0.0; wd.len()]);
                        for (i, gi) in g.iter().enumerate() {
                            if *gi == 0.0 {
                                continue;
                            }
                            let row = &mut gw[i * cols..(i + 1) * cols];
                            for (r, xj) in row.iter_mut().zip(xd) {
                                *r += gi * xj;
                            }
                        }
                    }
                    let gx = adj[x.0].get_or_insert_with(|| vec![0.0; cols]);
                    for (i, gi) in g.iter().enumerate() {
                        if *gi == 0.0 {
                            continue;
                        }
                        let row = &wd[i * cols..(i + 1) * cols];
                        for (acc, wij) in gx.iter_mut().zip(row) {
                            *acc += wij * gi;
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(&mut adj[a.0], g.len(), |i| g[i]);
                    add_into(&mut adj[b.0], g.len(), |i| g[i]);
                }
                Op::Sub(a, b) => {
                    add_into(&mut adj[a.0], g.len(), |i| g[i]);
                    add_into(&mut adj[b.0], g.len(), |i| -g[i]);
                }
                Op::Mul(a, b) => {
                    let (ad, bd) = (self.get(*a).data(), self.get(*b).data());
                    add_into(&mut adj[a.0], g.len(), |i| g[i] * bd[i]);
                    add_into(&mut adj[b.0], g.len(), |i| g[i] * ad[i]);
                }
                Op::Scale(a, c) => add_into(&mut adj[a.0], g.len(), |i| g[i] * c),
                Op::ScaleBy(v, s) => {
                    let c = self.get(*s).data()[0];
                    let vd = self.get(*v).data();
                    add_into(&mut adj[v.0], g.len(), |i| g[i] * c);
                    let gs: f64 = g.iter().zip(vd).map(|(a, b)| a * b).sum();
                    add_into(&mut adj[s.0], 1, |_| gs);
                }
                Op::OneMinus(a) => add_into(&mut adj[a.0], g.len(), |i| -g[i]),
                Op::Tanh(a) => add_into(&mut adj[a.0], g.len(), |i| g[i] * (1.0 - y[i] * y[i])),
                Op::Sigmoid(a) => add_into(&mut adj[a.0], g.len(), |i| g[i] * y[i] * (1.0 - y[i])),
                Op::Relu(a) => {
                    let xd = self.get(*a).data();
                    add_into(&mut adj[a.0], g.len(), |i| if xd[i] > 0.0 { g[i] } else { 0.0 })
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.get(*p).len();
                        add_into(&mut adj[p.0], n, |i| g[off + i]);
                        off += n;
                    }
                }
                Op::Softmax(a) => {
                    let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    add_into(&mut adj[a.0], g.len(), |i| y[i] * (g[i] - gy));
                }
                Op::Log(a) => {
                    let xd = self.get(*a).data();
                    add_into(&mut adj[a.0], g.len(), |i| {
                        if xd[i] > LOG_CLAMP {
                            g[i] / xd[i]
                        } else {
                            0.0
                        }
                    })
                }
                Op::Sum(a) => {
                    let n = self.get(*a).len();
                    add_into(&mut adj[a.0], n, |_| g[0]);
                }
                Op::Pick(a, idx) => {
                    let n = self.get(*a).len();
                    let buf = adj[a.0].get_or_insert_with(|| vec![0.0; n]);
                    buf[*idx] += g[0];
                }
                Op::Row(m, idx) => {
                    let mt = self.get(*m);
                    let c = mt.cols();
                    let buf = adj[m.0].get_or_insert_with(|| vec![0.0; mt.len()]);
                    for (b, gi) in buf[idx * c..(idx + 1) * c].iter_mut().zip(&g) {
                        *b += gi;
                    }
                }
            }
        }
        Ok(Gradients { slots })
    }
}
