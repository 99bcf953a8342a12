//! The sentence encoder: word projection, TreeLSTM composition over the thin stack,
//! and the optional tracking LSTM with its transition classifier.
//!
//! Every entry point runs on a batch of lanes; single-sentence encoding is a batch of
//! one. Weights are stored input-major, so a layer computes `x·W + b` on row vectors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SpinnError};
use crate::layers::{self, BatchNorm, ComposeCache, Init, Linear, LstmCache};
use crate::tensor::ops::{self, BatchNormCache, BatchNormConfig, NormMode};
use crate::tensor::{Float, Matrix, ParamStore, RngState};
use crate::thin_stack::{BatchStep, BatchedThinStack, RowSource, StepRecord};
use crate::transitions::Transition;

/// Width of GloVe vectors.
pub const WORD_DIM: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Parsed input, no tracking: a plain TreeLSTM.
    PiNt,
    /// Parsed input with the tracking LSTM feeding composition.
    Pi,
    /// Tracking LSTM that also predicts its own transitions.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::PiNt, Variant::Pi, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PiNt => "pi_nt",
            Variant::Pi => "pi",
            Variant::Full => "full",
        }
    }

    pub fn has_tracker(self) -> bool {
        self != Variant::PiNt
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = SpinnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pi_nt" | "pint" => Ok(Variant::PiNt),
            "pi" => Ok(Variant::Pi),
            "full" | "spinn" => Ok(Variant::Full),
            other => Err(SpinnError::Config(format!("unknown variant {other:?} (pi_nt, pi, full)"))),
        }
    }
}

/// Whether the stack follows supplied transitions or the model's own predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransitionMode {
    Given,
    Predicted,
}

impl FromStr for TransitionMode {
    type Err = SpinnError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "given" => Ok(TransitionMode::Given),
            "predicted" => Ok(TransitionMode::Predicted),
            other => Err(SpinnError::Config(format!("unknown transition mode {other:?} (given, predicted)"))),
        }
    }
}

impl fmt::Display for TransitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransitionMode::Given => "given",
            TransitionMode::Predicted => "predicted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub variant: Variant,
    /// Model dimension `D`; stack rows are `2D` wide.
    pub dim: usize,
    /// Tracking LSTM width. Ignored without a tracker.
    pub tracker_dim: usize,
    pub word_dim: usize,
    /// Sentence length `N` that batches are padded or cropped to.
    pub max_len: usize,
    /// Transition source at inference time.
    pub transition_mode: TransitionMode,
    /// Pair `f_l` with the stack top instead of the second entry.
    pub swap_forget: bool,
    /// Mask structurally impossible predicted actions.
    pub enforce_valid: bool,
    /// Dropout keep rate on the projection output.
    pub embed_keep: Float,
    pub bn: BatchNormConfig,
}

impl EncoderConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let (tracker_dim, embed_keep, transition_mode) = match variant {
            Variant::PiNt => (0, 0.83, TransitionMode::Given),
            Variant::Pi => (61, 0.92, TransitionMode::Given),
            Variant::Full => (79, 0.86, TransitionMode::Predicted),
        };
        EncoderConfig {
            variant,
            dim: 300,
            tracker_dim,
            word_dim: WORD_DIM,
            max_len: 25,
            transition_mode,
            swap_forget: false,
            enforce_valid: false,
            embed_keep,
            bn: BatchNormConfig::default(),
        }
    }

    /// Tracker width actually in use (0 for PI-NT).
    pub fn tracking(&self) -> usize {
        if self.variant.has_tracker() {
            self.tracker_dim
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.word_dim == 0 || self.max_len == 0 {
            return Err(SpinnError::Config("dim, word_dim and max_len must be positive".into()));
        }
        if self.variant.has_tracker() && self.tracker_dim == 0 {
            return Err(SpinnError::Config(format!("variant {} needs tracker_dim > 0", self.variant)));
        }
        if self.variant == Variant::PiNt && self.transition_mode == TransitionMode::Predicted {
            return Err(SpinnError::Config("pi_nt has no tracker and cannot predict transitions".into()));
        }
        if !(self.embed_keep > 0.0 && self.embed_keep <= 1.0) {
            return Err(SpinnError::Config(format!("embed_keep must be in (0, 1], got {}", self.embed_keep)));
        }
        Ok(())
    }
}

/// Forward-pass settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunMode {
    pub norm: NormMode,
    pub dropout: bool,
    pub transitions: TransitionMode,
    /// Retain what the backward pass needs.
    pub keep_cache: bool,
}

impl RunMode {
    /// Training: batch statistics, dropout, supplied transitions.
    pub const TRAIN: RunMode =
        RunMode { norm: NormMode::Train, dropout: true, transitions: TransitionMode::Given, keep_cache: true };
    /// Deterministic and differentiable: running statistics, no dropout.
    pub const CHECK: RunMode =
        RunMode { norm: NormMode::Eval, dropout: false, transitions: TransitionMode::Given, keep_cache: true };

    pub fn inference(transitions: TransitionMode) -> Self {
        RunMode { norm: NormMode::Eval, dropout: false, transitions, keep_cache: false }
    }
}

/// One sentence for the encoder.
#[derive(Clone, Copy, Debug)]
pub struct SentenceInput<'a> {
    /// Embedding row of each real token, in order.
    pub tokens: &'a [usize],
    /// Full-length actions including leading [`Transition::Pad`]s. Required in
    /// [`TransitionMode::Given`]; in predicted mode only its padding is used.
    pub transitions: Option<&'a [Transition]>,
}

/// The `⟨h, c⟩` pair held in stack and buffer slots.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePair {
    pub h: Vec<Float>,
    pub c: Vec<Float>,
}

impl StatePair {
    pub fn zeros(d: usize) -> Self {
        StatePair { h: vec![0.0; d], c: vec![0.0; d] }
    }

    pub fn from_row(row: &[Float]) -> Self {
        let d = row.len() / 2;
        StatePair { h: row[..d].to_vec(), c: row[d..].to_vec() }
    }

    pub fn to_row(&self) -> Vec<Float> {
        let mut r = self.h.clone();
        r.extend_from_slice(&self.c);
        r
    }
}

#[derive(Clone, Debug)]
struct TrackerStep {
    input: Matrix,
    cache: LstmCache,
    h: Matrix,
    /// Global buffer row whose `h` was read, per lane.
    buffer_read: Vec<Option<usize>>,
}

#[derive(Clone, Debug)]
struct ComposeStep {
    input: Matrix,
    cache: ComposeCache,
}

#[derive(Clone, Debug)]
struct EncoderCache {
    words: Matrix,
    bn: Option<BatchNormCache>,
    mask: Option<Matrix>,
    tracker: Vec<TrackerStep>,
    compose: Vec<Option<ComposeStep>>,
}

/// Result of a batched forward pass.
#[derive(Clone, Debug)]
pub struct EncodeOutput {
    /// Final stack-top `h` per lane (`B × D`).
    pub h: Matrix,
    /// Transition logits per step (`B × 2`), empty without a classifier.
    pub logits: Vec<Matrix>,
    /// Per-step records for every lane.
    pub steps: Vec<BatchStep>,
    pub stack: BatchedThinStack,
    /// Leading padding steps per lane.
    pub pads: Vec<usize>,
    /// First buffer row of each lane and its token count.
    pub lane_rows: Vec<(usize, usize)>,
    /// Projected, normalised buffer (`Σn × 2D`).
    pub buffer: Matrix,
    cache: Option<EncoderCache>,
}

impl EncodeOutput {
    pub fn lanes(&self) -> usize {
        self.h.rows()
    }

    pub fn steps_len(&self) -> usize {
        self.steps.len()
    }

    /// Actions executed by lane `b`.
    pub fn actions(&self, b: usize) -> Vec<Transition> {
        self.steps.iter().map(|s| s.records[b].action).collect()
    }

    pub fn records(&self, b: usize) -> Vec<StepRecord> {
        self.steps.iter().map(|s| s.records[b].clone()).collect()
    }

    /// Final `⟨h, c⟩` of lane `b`.
    pub fn top(&self, b: usize) -> StatePair {
        StatePair::from_row(self.stack.lane(b).top())
    }

    /// Tracker input rows at step `t` (`[h_b1; h_s1; h_s2; h_prev]`), when cached.
    pub fn tracker_input(&self, t: usize) -> Option<&Matrix> {
        self.cache.as_ref().and_then(|c| c.tracker.get(t)).map(|s| &s.input)
    }

    /// Number of batched composition calls.
    pub fn compose_calls(&self) -> usize {
        self.stack.compose_calls()
    }
}

/// Parameters and running statistics of one encoder, addressed into a shared
/// [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub proj: Linear,
    pub proj_bn: BatchNorm,
    pub comp: Linear,
    pub tracker: Option<Linear>,
    pub head: Option<Linear>,
}

impl Encoder {
    /// Registers parameters under `enc.*`.
    ///
    /// Weights get He initialisation except the transition classifier, which draws
    /// from `U[-0.005, 0.005]`. Biases are zero apart from the composition forget
    /// gates, which start at 1.
    pub fn create(config: EncoderConfig, store: &mut ParamStore, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let d = config.dim;
        let dt = config.tracking();
        let proj = Linear::create(store, "enc.proj", config.word_dim, 2 * d, Init::He, rng)?;
        let proj_bn = BatchNorm::create(store, "enc.proj.bn", 2 * d, config.bn)?;
        let comp = Linear::create(store, "enc.comp", 2 * d + dt, 5 * d, Init::He, rng)?;
        store.value_mut(comp.b).data_mut()[d..3 * d].fill(1.0);
        let (tracker, head) = if config.variant.has_tracker() {
            let tr = Linear::create(store, "enc.track", 3 * d + dt, 4 * dt, Init::He, rng)?;
            let hd = Linear::create(store, "enc.trans", dt, 2, Init::Uniform(-0.005, 0.005), rng)?;
            (Some(tr), Some(hd))
        } else {
            (None, None)
        };
        Ok(Encoder { config, proj, proj_bn, comp, tracker, head })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// `⟨h, c⟩ = split(x·W_wd + b_wd)` without normalisation or dropout.
    pub fn project_word(&self, store: &ParamStore, x: &[Float]) -> Result<StatePair> {
        if x.len() != self.config.word_dim {
            return Err(SpinnError::dims("project_word", (1, x.len()), (1, self.config.word_dim)));
        }
        let y = self.proj.forward(store, &Matrix::row_vector(x))?;
        Ok(StatePair::from_row(y.row(0)))
    }

    /// TreeLSTM composition of two pairs. `right` is the stack top; `e` is the
    /// tracker state and must be empty exactly when there is no tracker.
    pub fn compose(&self, store: &ParamStore, left: &StatePair, right: &StatePair, e: &[Float]) -> Result<StatePair> {
        if e.len() != self.config.tracking() {
            return Err(SpinnError::Config(format!(
                "compose expects a context vector of width {}, got {}",
                self.config.tracking(),
                e.len()
            )));
        }
        let mut z = right.h.clone();
        z.extend_from_slice(&left.h);
        z.extend_from_slice(e);
        let pre = self.comp.forward(store, &Matrix::row_vector(&z))?;
        let (out, _) = layers::compose_cell(
            pre,
            Matrix::row_vector(&left.c),
            Matrix::row_vector(&right.c),
            self.config.swap_forget,
        )?;
        Ok(StatePair::from_row(out.row(0)))
    }

    /// One tracking LSTM step. `state` is `(h, c)`.
    pub fn track(
        &self,
        store: &ParamStore,
        buffer_top: &[Float],
        stack_top1: &[Float],
        stack_top2: &[Float],
        state: &(Vec<Float>, Vec<Float>),
    ) -> Result<(Vec<Float>, Vec<Float>)> {
        let tracker = self.tracker.ok_or_else(|| SpinnError::Config("pi_nt has no tracking LSTM".into()))?;
        let mut x = buffer_top.to_vec();
        x.extend_from_slice(stack_top1);
        x.extend_from_slice(stack_top2);
        x.extend_from_slice(&state.0);
        let pre = tracker.forward(store, &Matrix::row_vector(&x))?;
        let (h, cache) = layers::lstm_cell(pre, Matrix::row_vector(&state.1))?;
        Ok((h.row(0).to_vec(), cache.c.row(0).to_vec()))
    }

    /// Transition logits and their softmax for a tracker state.
    pub fn predict_transition(&self, store: &ParamStore, h_tracking: &[Float]) -> Result<(Vec<Float>, Vec<Float>)> {
        let head = self.head.ok_or_else(|| SpinnError::Config("pi_nt has no transition classifier".into()))?;
        let logits = head.forward(store, &Matrix::row_vector(h_tracking))?;
        let p = ops::softmax(logits.row(0));
        Ok((logits.row(0).to_vec(), p))
    }

    /// Encodes a batch of sentences in lockstep.
    pub fn forward(
        &mut self,
        store: &ParamStore,
        embeddings: &Matrix,
        inputs: &[SentenceInput<'_>],
        mode: RunMode,
        rng: &mut RngState,
    ) -> Result<EncodeOutput> {
        let cfg = self.config.clone();
        let (d, dt) = (cfg.dim, cfg.tracking());
        let w = 2 * d;
        if mode.transitions == TransitionMode::Predicted && self.head.is_none() {
            return Err(SpinnError::Config(format!("variant {} cannot predict transitions", cfg.variant)));
        }
        if embeddings.cols() != cfg.word_dim {
            return Err(SpinnError::dims("embeddings", embeddings.shape(), (embeddings.rows(), cfg.word_dim)));
        }
        let steps = self.step_count(inputs, mode.transitions)?;
        let b_count = inputs.len();

        // Buffer: projected words of every lane, stacked.
        let mut lane_rows = Vec::with_capacity(b_count);
        let mut pads = Vec::with_capacity(b_count);
        let mut ids = Vec::new();
        for inp in inputs {
            let tokens = match (mode.transitions, inp.transitions) {
                (TransitionMode::Predicted, None) if inp.tokens.len() > cfg.max_len => {
                    &inp.tokens[inp.tokens.len() - cfg.max_len..]
                }
                _ => inp.tokens,
            };
            let pad = match inp.transitions {
                Some(seq) => seq.iter().take_while(|&&a| a == Transition::Pad).count(),
                None => steps.saturating_sub((2 * tokens.len()).saturating_sub(1)),
            };
            lane_rows.push((ids.len(), tokens.len()));
            pads.push(pad);
            ids.extend_from_slice(tokens);
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= embeddings.rows()) {
            return Err(SpinnError::Config(format!("token id {bad} outside embedding table of {}", embeddings.rows())));
        }
        let words = embeddings.select_rows(&ids);
        let mut buffer = self.proj.forward(store, &words)?;
        let mut bn_cache = None;
        if buffer.rows() > 0 && mode.norm == NormMode::Eval && !mode.keep_cache {
            self.proj_bn.eval_in_place(store, &mut buffer)?;
        } else if buffer.rows() > 0 {
            let (y, cache) = self.proj_bn.forward(store, &buffer, mode.norm)?;
            buffer = y;
            bn_cache = Some(cache);
        }
        let mask = layers::maybe_mask(buffer.rows(), w, cfg.embed_keep, mode.dropout, rng)?;
        if let Some(m) = &mask {
            layers::mul_in_place(&mut buffer, m)?;
        }

        let comp_w = store.value(self.comp.w);
        let comp_b = store.value(self.comp.b).data();
        let comp_packed = std::cell::OnceCell::new();
        let mut stack = BatchedThinStack::new(b_count, steps, w);
        let mut h_tr = Matrix::zeros(b_count, dt);
        let mut c_tr = Matrix::zeros(b_count, dt);
        let mut logits_all = Vec::new();
        let mut step_out = Vec::with_capacity(steps);
        let mut tracker_cache = Vec::new();
        let mut compose_cache: Vec<Option<ComposeStep>> = Vec::new();
        let buffers: Vec<&[Float]> =
            lane_rows.iter().map(|&(off, n)| &buffer.data()[off * w..(off + n) * w]).collect();

        for t in 0..steps {
            if let Some(tracker) = self.tracker {
                let mut x = Matrix::zeros(b_count, 3 * d + dt);
                let mut reads = vec![None; b_count];
                for b in 0..b_count {
                    let lane = stack.lane(b);
                    let (off, n) = lane_rows[b];
                    let row = x.row_mut(b);
                    if t >= pads[b] && lane.cursor() < n {
                        let g = off + lane.cursor();
                        row[..d].copy_from_slice(&buffer.row(g)[..d]);
                        reads[b] = Some(g);
                    }
                    let (s2, s1) = lane.peek_top2();
                    row[d..2 * d].copy_from_slice(&lane.row(s1)[..d]);
                    row[2 * d..3 * d].copy_from_slice(&lane.row(s2)[..d]);
                    row[3 * d..].copy_from_slice(h_tr.row(b));
                }
                let pre = tracker.forward(store, &x)?;
                let (h, cache) = layers::lstm_cell(pre, std::mem::take(&mut c_tr))?;
                c_tr = cache.c.clone();
                h_tr = h;
                if mode.keep_cache {
                    tracker_cache.push(TrackerStep { input: x, cache, h: h_tr.clone(), buffer_read: reads });
                }
            }
            let logits = match self.head {
                Some(head) => Some(head.forward(store, &h_tr)?),
                None => None,
            };

            let mut actions = Vec::with_capacity(b_count);
            for (b, inp) in inputs.iter().enumerate() {
                let a = if t < pads[b] {
                    Transition::Pad
                } else {
                    match mode.transitions {
                        TransitionMode::Given => inp.transitions.expect("checked by step_count")[t],
                        TransitionMode::Predicted => {
                            let l = logits.as_ref().expect("head present").row(b);
                            let mut a = if l[1] > l[0] { Transition::Reduce } else { Transition::Shift };
                            if cfg.enforce_valid {
                                let lane = stack.lane(b);
                                let depth = lane.depth().saturating_sub(pads[b]);
                                let buffered = lane.cursor() < lane_rows[b].1;
                                if depth < 2 && buffered {
                                    a = Transition::Shift;
                                } else if !buffered && depth >= 2 {
                                    a = Transition::Reduce;
                                }
                            }
                            a
                        }
                    }
                };
                actions.push(a);
            }

            let mut step_compose = None;
            let mut composer = |left: &Matrix, right: &Matrix, lanes: &[usize]| -> Result<Matrix> {
                let k = lanes.len();
                let mut z = Matrix::zeros(k, w + dt);
                let mut cl = Matrix::zeros(k, d);
                let mut cr = Matrix::zeros(k, d);
                for (j, &b) in lanes.iter().enumerate() {
                    let row = z.row_mut(j);
                    row[..d].copy_from_slice(&right.row(j)[..d]);
                    row[d..w].copy_from_slice(&left.row(j)[..d]);
                    row[w..].copy_from_slice(h_tr.row(b));
                    cl.row_mut(j).copy_from_slice(&left.row(j)[d..]);
                    cr.row_mut(j).copy_from_slice(&right.row(j)[d..]);
                }
                let mut pre = if k < 4 {
                    z.matmul(comp_w)?
                } else {
                    z.matmul_packed(comp_packed.get_or_init(|| comp_w.packed()))?
                };
                pre.add_row(comp_b)?;
                let (out, cache) = layers::compose_cell(pre, cl, cr, cfg.swap_forget)?;
                if mode.keep_cache {
                    step_compose = Some(ComposeStep { input: z, cache });
                }
                Ok(out)
            };
            let rec = stack.step(&actions, &buffers, &mut composer)?;
            if mode.keep_cache {
                compose_cache.push(step_compose);
            }
            step_out.push(rec);
            if let Some(l) = logits {
                logits_all.push(l);
            }
        }

        let mut h = Matrix::zeros(b_count, d);
        for b in 0..b_count {
            h.row_mut(b).copy_from_slice(&stack.lane(b).top()[..d]);
        }
        let cache = mode.keep_cache.then_some(EncoderCache {
            words,
            bn: bn_cache,
            mask,
            tracker: tracker_cache,
            compose: compose_cache,
        });
        Ok(EncodeOutput { h, logits: logits_all, steps: step_out, stack, pads, lane_rows, buffer, cache })
    }

    fn step_count(&self, inputs: &[SentenceInput<'_>], mode: TransitionMode) -> Result<usize> {
        let mut steps: Option<usize> = None;
        for (b, inp) in inputs.iter().enumerate() {
            let len = match (inp.transitions, mode) {
                (Some(seq), _) => seq.len(),
                (None, TransitionMode::Predicted) => 2 * self.config.max_len - 1,
                (None, TransitionMode::Given) => {
                    return Err(SpinnError::Config(format!("lane {b} has no transitions in given mode")))
                }
            };
            match steps {
                None => steps = Some(len),
                Some(s) if s != len => {
                    return Err(SpinnError::Config(format!(
                        "inconsistent padding: lane {b} has {len} steps, lane 0 has {s}"
                    )))
                }
                _ => {}
            }
        }
        Ok(steps.unwrap_or(0))
    }

    /// Accumulates parameter gradients for upstream `dh` (`B × D`) on the sentence
    /// encodings and optional `d_logits` (one `B × 2` per step).
    pub fn backward(
        &self,
        store: &mut ParamStore,
        out: &EncodeOutput,
        dh: &Matrix,
        d_logits: Option<&[Matrix]>,
    ) -> Result<()> {
        let cache = out
            .cache
            .as_ref()
            .ok_or_else(|| SpinnError::Internal("backward needs a forward pass run with keep_cache".into()))?;
        let (d, dt) = (self.config.dim, self.config.tracking());
        let w = 2 * d;
        let b_count = out.lanes();
        let steps = out.steps.len();
        if dh.shape() != (b_count, d) {
            return Err(SpinnError::dims("encoder backward", dh.shape(), (b_count, d)));
        }
        if let Some(dl) = d_logits {
            if dl.len() != out.logits.len() {
                return Err(SpinnError::Internal(format!("{} logit gradients for {} steps", dl.len(), out.logits.len())));
            }
        }
        let comp_wt = store.value(self.comp.w).transpose();
        let track_wt = self.tracker.map(|tr| store.value(tr.w).transpose());
        let head_wt = self.head.map(|hd| store.value(hd.w).transpose());

        let mut d_rows: Vec<Vec<Float>> = vec![vec![0.0; (steps + 1) * w]; b_count];
        for b in 0..b_count {
            let top = out.stack.lane(b).peek_top2().1;
            if top != 0 {
                for (g, x) in d_rows[b][top * w..top * w + d].iter_mut().zip(dh.row(b)) {
                    *g += x;
                }
            }
        }
        let mut d_buffer = Matrix::zeros(out.buffer.rows(), w);
        let mut dh_tr = Matrix::zeros(b_count, dt);
        let mut dc_tr = Matrix::zeros(b_count, dt);

        for t in (0..steps).rev() {
            let step = &out.steps[t];
            let mut dh_step = Matrix::zeros(b_count, dt);
            for (b, rec) in step.records.iter().enumerate() {
                if let RowSource::Buffer(i) = rec.source {
                    let g = out.lane_rows[b].0 + i;
                    let src = &d_rows[b][rec.t * w..(rec.t + 1) * w];
                    for (x, y) in d_buffer.row_mut(g).iter_mut().zip(src) {
                        *x += y;
                    }
                }
            }
            if let Some(cs) = &cache.compose[t] {
                let lanes = &step.reduce_lanes;
                let mut d_out = Matrix::zeros(lanes.len(), w);
                for (j, &b) in lanes.iter().enumerate() {
                    let t_row = step.records[b].t;
                    d_out.row_mut(j).copy_from_slice(&d_rows[b][t_row * w..(t_row + 1) * w]);
                }
                let (d_pre, dcl, dcr) = layers::compose_cell_backward(&cs.cache, &d_out, self.config.swap_forget);
                let dz = d_pre.matmul(&comp_wt)?;
                self.comp.backward_params(store, &cs.input, &d_pre)?;
                for (j, &b) in lanes.iter().enumerate() {
                    let RowSource::Compose { left, right } = step.records[b].source else {
                        return Err(SpinnError::Internal(format!("lane {b} composed without a compose record")));
                    };
                    let z = dz.row(j);
                    add_into(&mut d_rows[b], right, w, 0, &z[..d]);
                    add_into(&mut d_rows[b], left, w, 0, &z[d..w]);
                    add_into(&mut d_rows[b], right, w, d, dcr.row(j));
                    add_into(&mut d_rows[b], left, w, d, dcl.row(j));
                    for (x, y) in dh_step.row_mut(b).iter_mut().zip(&z[w..]) {
                        *x += y;
                    }
                }
            }
            if let (Some(head), Some(dl), Some(wt)) = (self.head, d_logits, &head_wt) {
                let ts = &cache.tracker[t];
                dh_step.add_assign(&dl[t].matmul(wt)?)?;
                head.backward_params(store, &ts.h, &dl[t])?;
            }
            if let (Some(tracker), Some(wt)) = (self.tracker, &track_wt) {
                let ts = &cache.tracker[t];
                dh_step.add_assign(&dh_tr)?;
                let (d_pre, dc_prev) = layers::lstm_cell_backward(&ts.cache, &dh_step, &dc_tr);
                let dx = d_pre.matmul(wt)?;
                tracker.backward_params(store, &ts.input, &d_pre)?;
                for b in 0..b_count {
                    let x = dx.row(b);
                    if let Some(g) = ts.buffer_read[b] {
                        for (y, v) in d_buffer.row_mut(g)[..d].iter_mut().zip(&x[..d]) {
                            *y += v;
                        }
                    }
                    let (s2, s1) = step.records[b].peek;
                    add_into(&mut d_rows[b], s1, w, 0, &x[d..2 * d]);
                    add_into(&mut d_rows[b], s2, w, 0, &x[2 * d..3 * d]);
                    dh_tr.row_mut(b).copy_from_slice(&x[3 * d..]);
                }
                dc_tr = dc_prev;
            }
        }

        if d_buffer.rows() > 0 {
            if let Some(m) = &cache.mask {
                layers::mul_in_place(&mut d_buffer, m)?;
            }
            let bn = cache.bn.as_ref().expect("buffer rows imply a batch-norm cache");
            let d_pre = self.proj_bn.backward(store, bn, &d_buffer);
            self.proj.backward_params(store, &cache.words, &d_pre)?;
        }
        Ok(())
    }
}

fn add_into(rows: &mut [Float], row: usize, width: usize, offset: usize, g: &[Float]) {
    if row == 0 {
        return;
    }
    let start = row * width + offset;
    for (x, y) in rows[start..start + g.len()].iter_mut().zip(g) {
        *x += y;
    }
}

/// Argmax over two logits, ties to SHIFT.
pub fn choose_transition(logits: &[Float]) -> Transition {
    if logits[1] > logits[0] {
        Transition::Reduce
    } else {
        Transition::Shift
    }
}
