//! Slow reference implementations for tests: a recursive TreeLSTM over explicit
//! trees, a stack interpreter that copies the whole stack every step, and central
//! finite differences. Nothing here calls the batched kernels, layers or thin stack.

use crate::encoder::{Encoder, StatePair};
use crate::error::{Result, SpinnError};
use crate::tensor::{Float, Matrix, ParamStore};
use crate::transitions::{BinaryTree, Transition, Violation};

/// Plain copies of the parameters the recursive model needs.
#[derive(Clone, Debug)]
pub struct TreeLstmParams {
    pub dim: usize,
    pub proj_w: Matrix,
    pub proj_b: Vec<Float>,
    pub bn_gamma: Vec<Float>,
    pub bn_beta: Vec<Float>,
    pub bn_mean: Vec<Float>,
    pub bn_var: Vec<Float>,
    pub bn_eps: Float,
    pub comp_w: Matrix,
    pub comp_b: Vec<Float>,
    pub swap_forget: bool,
}

impl TreeLstmParams {
    /// Snapshot of a tracker-free encoder in evaluation mode.
    pub fn from_encoder(enc: &Encoder, store: &ParamStore) -> Result<Self> {
        if enc.tracker.is_some() {
            return Err(SpinnError::Config("the recursive oracle has no tracking LSTM".into()));
        }
        Ok(TreeLstmParams {
            dim: enc.config.dim,
            proj_w: store.value(enc.proj.w).clone(),
            proj_b: store.value(enc.proj.b).data().to_vec(),
            bn_gamma: store.value(enc.proj_bn.gamma).data().to_vec(),
            bn_beta: store.value(enc.proj_bn.beta).data().to_vec(),
            bn_mean: enc.proj_bn.stats.mean.clone(),
            bn_var: enc.proj_bn.stats.var.clone(),
            bn_eps: enc.proj_bn.cfg.eps,
            comp_w: store.value(enc.comp.w).clone(),
            comp_b: store.value(enc.comp.b).data().to_vec(),
            swap_forget: enc.config.swap_forget,
        })
    }

    /// Projection followed by evaluation-mode normalisation, one scalar at a time.
    pub fn leaf(&self, x: &[Float]) -> StatePair {
        let w = 2 * self.dim;
        let mut row = vec![0.0; w];
        for (j, out) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, xv) in x.iter().enumerate() {
                s += xv * self.proj_w.get(k, j);
            }
            let y = s + self.proj_b[j];
            *out = (y - self.bn_mean[j]) / (self.bn_var[j] + self.bn_eps).sqrt() * self.bn_gamma[j] + self.bn_beta[j];
        }
        StatePair::from_row(&row)
    }

    /// TreeLSTM node; `right` is the later (stack-top) child.
    pub fn node(&self, left: &StatePair, right: &StatePair) -> StatePair {
        let d = self.dim;
        let mut input = right.h.clone();
        input.extend_from_slice(&left.h);
        let sig = |v: Float| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; d];
        let mut c = vec![0.0; d];
        for j in 0..d {
            let gate = |block: usize| {
                let col = block * d + j;
                let mut s = 0.0;
                for (k, v) in input.iter().enumerate() {
                    s += v * self.comp_w.get(k, col);
                }
                s + self.comp_b[col]
            };
            let i = sig(gate(0));
            let fl = sig(gate(1));
            let fr = sig(gate(2));
            let o = sig(gate(3));
            let g = gate(4).tanh();
            let (cl, cr) = if self.swap_forget { (right.c[j], left.c[j]) } else { (left.c[j], right.c[j]) };
            c[j] = fl * cl + fr * cr + i * g;
            h[j] = o * c[j].tanh();
        }
        StatePair { h, c }
    }
}

/// Structural recursion over `tree`; `word` maps a leaf token to its input vector.
pub fn recursive_treelstm<F>(tree: &BinaryTree, word: &F, params: &TreeLstmParams) -> StatePair
where
    F: Fn(&str) -> Vec<Float>,
{
    match tree {
        BinaryTree::Leaf(tok) => params.leaf(&word(tok)),
        BinaryTree::Node(l, r) => {
            let left = recursive_treelstm(l, word, params);
            let right = recursive_treelstm(r, word, params);
            params.node(&left, &right)
        }
    }
}

/// Literal stack semantics with a full copy of the stack at every step. Strict: any
/// underflow or exhausted buffer is an error. Padding pushes a zero pair.
pub fn naive_stack_run<C>(buffer: &[StatePair], seq: &[Transition], mut composer: C) -> Result<StatePair>
where
    C: FnMut(&StatePair, &StatePair) -> StatePair,
{
    let d = buffer.first().map_or(0, |p| p.h.len());
    let mut stack: Vec<StatePair> = Vec::new();
    let mut next = 0;
    for (index, &a) in seq.iter().enumerate() {
        let mut copy = stack.clone();
        match a {
            Transition::Pad => copy.push(StatePair::zeros(d)),
            Transition::Shift => {
                let item = buffer
                    .get(next)
                    .ok_or(SpinnError::Validity { index, reason: Violation::BufferExhausted })?;
                copy.push(item.clone());
                next += 1;
            }
            Transition::Reduce => {
                if copy.len() < 2 {
                    return Err(SpinnError::Validity { index, reason: Violation::StackUnderflow });
                }
                let right = copy.pop().expect("checked");
                let left = copy.pop().expect("checked");
                copy.push(composer(&left, &right));
            }
        }
        stack = copy;
    }
    stack.pop().ok_or_else(|| SpinnError::Internal("empty sequence leaves an empty stack".into()))
}

/// Central differences `(f(θ + h) − f(θ − h)) / 2h` for every coordinate of every
/// parameter, in store order. Values are restored afterwards.
pub fn finite_diff_grad<F>(store: &mut ParamStore, h: Float, mut loss: F) -> Result<Vec<Matrix>>
where
    F: FnMut(&ParamStore) -> Result<Float>,
{
    let ids: Vec<_> = store.ids().collect();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let (r, c) = store.value(id).shape();
        let mut g = Matrix::zeros(r, c);
        for k in 0..r * c {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + h;
            let up = loss(store)?;
            store.value_mut(id).data_mut()[k] = orig - h;
            let down = loss(store)?;
            store.value_mut(id).data_mut()[k] = orig;
            g.data_mut()[k] = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Magnitudes below this are compared absolutely when computing [`relative_error`].
pub const RELATIVE_FLOOR: Float = 1e-4;

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: Float, numeric: Float) -> Float {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}
