//! Feedforward encoding throughput: the batched thin-stack encoder against a
//! recursive per-example TreeRNN and a sequence LSTM, on random input.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::encoder::{Encoder, EncoderConfig, RunMode, SentenceInput, StatePair, TransitionMode, Variant};
use crate::error::{Result, SpinnError};
use crate::layers::{self, Init, Linear, LstmCache};
use crate::tensor::{self, ops, Float, Matrix, ParamStore, RngState, FLOAT_BITS};
use crate::transitions::{random_tree, BinaryTree, Transition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchModel {
    /// Thin-stack PI-NT encoder, one forward pass per batch.
    ThinStack,
    /// Recursive TreeLSTM with the same parameters, one node at a time.
    TreeRnn,
    /// Single-layer LSTM over the tokens, batched.
    Lstm,
}

impl BenchModel {
    pub const ALL: [BenchModel; 3] = [BenchModel::ThinStack, BenchModel::TreeRnn, BenchModel::Lstm];

    pub fn name(self) -> &'static str {
        match self {
            BenchModel::ThinStack => "thin-stack",
            BenchModel::TreeRnn => "tree-rnn",
            BenchModel::Lstm => "lstm",
        }
    }
}

impl FromStr for BenchModel {
    type Err = SpinnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thin-stack" | "spinn" => Ok(BenchModel::ThinStack),
            "tree-rnn" | "treernn" => Ok(BenchModel::TreeRnn),
            "lstm" | "rnn" => Ok(BenchModel::Lstm),
            _ => Err(SpinnError::Config(format!("unknown bench model {s:?} (thin-stack, tree-rnn, lstm)"))),
        }
    }
}

/// Allocation counters supplied by the host binary's allocator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AllocStats {
    pub allocations: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub models: Vec<BenchModel>,
    pub batch_sizes: Vec<usize>,
    pub seq_len: usize,
    pub dim: usize,
    pub word_dim: usize,
    pub vocab: usize,
    pub repetitions: usize,
    /// Each timed repetition encodes at least this many sentences.
    pub min_sentences: usize,
    pub threads: usize,
    pub seed: u64,
    pub alloc_probe: Option<fn() -> AllocStats>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            models: BenchModel::ALL.to_vec(),
            batch_sizes: vec![1, 32, 64, 128, 256, 512],
            seq_len: 30,
            dim: 300,
            word_dim: 300,
            vocab: 10_000,
            repetitions: 3,
            min_sentences: 128,
            threads: 1,
            seed: 1,
            alloc_probe: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchCell {
    pub model: BenchModel,
    pub batch_size: usize,
    pub sentences: usize,
    pub rep_seconds: Vec<f64>,
    pub median_seconds: f64,
    pub sentences_per_second: f64,
    /// Per timed repetition, when a probe is installed.
    pub alloc: Option<AllocStats>,
}

#[derive(Clone, Debug)]
pub struct Environment {
    pub cpu: String,
    pub threads: usize,
    pub float_bits: usize,
    pub simd: &'static str,
    pub fused_multiply_add: bool,
}

impl Environment {
    pub fn detect(threads: usize) -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| s.lines().find(|l| l.starts_with("model name")).map(|l| l.to_string()))
            .and_then(|l| l.split_once(':').map(|(_, v)| v.trim().to_string()))
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        Environment {
            cpu,
            threads,
            float_bits: FLOAT_BITS,
            simd: simd_level(),
            fused_multiply_add: tensor::fused(),
        }
    }
}

fn simd_level() -> &'static str {
    #[cfg(target_arch = "x86_64")]
    {
        if tensor::fused() && std::arch::is_x86_feature_detected!("avx512f") {
            return "avx512";
        }
        if tensor::fused() && std::arch::is_x86_feature_detected!("avx2") {
            return "avx2";
        }
    }
    "portable"
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub env: Environment,
    pub cells: Vec<BenchCell>,
    /// Largest `|Δh|` between the thin-stack and recursive encoders on a check batch.
    pub tree_agreement: Float,
    /// Largest `|Δh|` between batched and one-at-a-time LSTM runs.
    pub lstm_agreement: Float,
}

impl BenchReport {
    pub fn cell(&self, model: BenchModel, batch: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.model == model && c.batch_size == batch)
    }

    /// Throughput of `model` at batch `b` over its throughput at batch `a`.
    pub fn speedup(&self, model: BenchModel, a: usize, b: usize) -> Option<f64> {
        Some(self.cell(model, b)?.sentences_per_second / self.cell(model, a)?.sentences_per_second)
    }

    /// `(max − min) / max` throughput across the measured batch sizes.
    pub fn spread(&self, model: BenchModel) -> Option<f64> {
        let v: Vec<f64> = self.cells.iter().filter(|c| c.model == model).map(|c| c.sentences_per_second).collect();
        if v.is_empty() {
            return None;
        }
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        Some((max - min) / max)
    }

    /// One JSON object per cell.
    pub fn json_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let v = serde_json::json!({
                "model": c.model.name(),
                "batch_size": c.batch_size,
                "sentences": c.sentences,
                "seq_len": self.config.seq_len,
                "dim": self.config.dim,
                "median_seconds": c.median_seconds,
                "rep_seconds": c.rep_seconds,
                "sentences_per_second": c.sentences_per_second,
                "allocations": c.alloc.map(|a| a.allocations),
                "alloc_bytes": c.alloc.map(|a| a.bytes),
                "cpu": self.env.cpu,
                "threads": self.env.threads,
                "float_bits": self.env.float_bits,
                "simd": self.env.simd,
                "fma": self.env.fused_multiply_add,
            });
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = &self.env;
        writeln!(f, "# CPU batched thin stack vs CPU per-example TreeRNN (no GPU timing)")?;
        writeln!(
            f,
            "# cpu: {}  threads: {}  float: {}-bit  simd: {}  fma: {}",
            e.cpu, e.threads, e.float_bits, e.simd, e.fused_multiply_add
        )?;
        writeln!(
            f,
            "# D = {}, words = {}, tokens per sentence = {}, median of {} reps after 1 warm-up",
            self.config.dim, self.config.word_dim, self.config.seq_len, self.config.repetitions
        )?;
        writeln!(
            f,
            "# agreement: thin stack vs recursive max |dh| = {:.2e}, batched vs single LSTM = {:.2e}",
            self.tree_agreement, self.lstm_agreement
        )?;
        writeln!(
            f,
            "{:<11} {:>6} {:>9} {:>11} {:>11} {:>12} {:>12}",
            "model", "batch", "sentences", "median_ms", "sent/s", "allocs/rep", "MB/rep"
        )?;
        for c in &self.cells {
            let (n, mb) = match c.alloc {
                Some(a) => (a.allocations.to_string(), format!("{:.1}", a.bytes as f64 / 1e6)),
                None => ("-".into(), "-".into()),
            };
            writeln!(
                f,
                "{:<11} {:>6} {:>9} {:>11.2} {:>11.1} {:>12} {:>12}",
                c.model.name(),
                c.batch_size,
                c.sentences,
                c.median_seconds * 1e3,
                c.sentences_per_second,
                n,
                mb
            )?;
        }
        Ok(())
    }
}

/// Recursive TreeLSTM that reads the thin-stack encoder's parameters and applies
/// one projection or composition per call.
pub struct TreeRnn<'a> {
    encoder: &'a Encoder,
    store: &'a ParamStore,
    bn_scale: Vec<Float>,
    bn_shift: Vec<Float>,
}

impl<'a> TreeRnn<'a> {
    pub fn new(encoder: &'a Encoder, store: &'a ParamStore) -> Self {
        let bn = &encoder.proj_bn;
        let gamma = store.value(bn.gamma).data();
        let beta = store.value(bn.beta).data();
        let mut bn_scale = Vec::with_capacity(gamma.len());
        let mut bn_shift = Vec::with_capacity(gamma.len());
        for j in 0..gamma.len() {
            let s = gamma[j] / (bn.stats.var[j] + bn.cfg.eps).sqrt();
            bn_scale.push(s);
            bn_shift.push(beta[j] - bn.stats.mean[j] * s);
        }
        TreeRnn { encoder, store, bn_scale, bn_shift }
    }

    fn leaf(&self, x: &[Float]) -> Result<StatePair> {
        let y = self.encoder.proj.forward(self.store, &Matrix::row_vector(x))?;
        let row: Vec<Float> =
            y.row(0).iter().zip(&self.bn_scale).zip(&self.bn_shift).map(|((v, s), b)| v * s + b).collect();
        Ok(StatePair::from_row(&row))
    }

    /// Encodes `tree`, whose leaves are consumed from `words` left to right.
    pub fn encode(&self, tree: &BinaryTree, words: &mut dyn Iterator<Item = &'a [Float]>) -> Result<StatePair> {
        match tree {
            BinaryTree::Leaf(_) => {
                let x = words.next().ok_or_else(|| SpinnError::Internal("tree has more leaves than words".into()))?;
                self.leaf(x)
            }
            BinaryTree::Node(l, r) => {
                let left = self.encode(l, words)?;
                let right = self.encode(r, words)?;
                self.encoder.compose(self.store, &left, &right, &[])
            }
        }
    }
}

#[derive(Clone, Debug)]
struct LstmStep {
    active: Vec<usize>,
    input: Matrix,
    cache: LstmCache,
}

#[derive(Clone, Debug)]
pub struct LstmOutput {
    /// Final hidden state per sentence (`B × D`).
    pub h: Matrix,
    steps: Vec<LstmStep>,
}

/// Single-layer LSTM over word vectors; the final hidden state encodes the sentence.
/// Sentences are right-aligned so every lane ends on the last step; a lane's state
/// stays zero until its first token.
#[derive(Clone, Debug)]
pub struct SeqLstm {
    pub dim: usize,
    pub word_dim: usize,
    pub cell: Linear,
}

impl SeqLstm {
    pub fn create(store: &mut ParamStore, word_dim: usize, dim: usize, rng: &mut RngState) -> Result<Self> {
        let cell = Linear::create(store, "lstm.cell", word_dim + dim, 4 * dim, Init::He, rng)?;
        Ok(SeqLstm { dim, word_dim, cell })
    }

    pub fn forward(&self, store: &ParamStore, embeddings: &Matrix, sentences: &[&[usize]]) -> Result<LstmOutput> {
        let (d, wd) = (self.dim, self.word_dim);
        let b = sentences.len();
        let len = sentences.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut h = Matrix::zeros(b, d);
        let mut c = Matrix::zeros(b, d);
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let active: Vec<usize> = (0..b).filter(|&i| t + sentences[i].len() >= len).collect();
            let mut z = Matrix::zeros(active.len(), wd + d);
            let mut c_prev = Matrix::zeros(active.len(), d);
            for (j, &i) in active.iter().enumerate() {
                let tok = sentences[i][t + sentences[i].len() - len];
                let row = z.row_mut(j);
                row[..wd].copy_from_slice(embeddings.row(tok));
                row[wd..].copy_from_slice(h.row(i));
                c_prev.row_mut(j).copy_from_slice(c.row(i));
            }
            let pre = self.cell.forward(store, &z)?;
            let (h_new, cache) = layers::lstm_cell(pre, c_prev)?;
            for (j, &i) in active.iter().enumerate() {
                h.row_mut(i).copy_from_slice(h_new.row(j));
                c.row_mut(i).copy_from_slice(cache.c.row(j));
            }
            steps.push(LstmStep { active, input: z, cache });
        }
        Ok(LstmOutput { h, steps })
    }

    /// Accumulates parameter gradients for upstream `dh` on the final states.
    pub fn backward(&self, store: &mut ParamStore, out: &LstmOutput, dh: &Matrix) -> Result<()> {
        let d = self.dim;
        let wt = store.value(self.cell.w).transpose();
        let mut dh_state = dh.clone();
        let mut dc_state = Matrix::zeros(dh.rows(), d);
        for step in out.steps.iter().rev() {
            let k = step.active.len();
            let mut dhk = Matrix::zeros(k, d);
            let mut dck = Matrix::zeros(k, d);
            for (j, &i) in step.active.iter().enumerate() {
                dhk.row_mut(j).copy_from_slice(dh_state.row(i));
                dck.row_mut(j).copy_from_slice(dc_state.row(i));
            }
            let (d_pre, dc_prev) = layers::lstm_cell_backward(&step.cache, &dhk, &dck);
            self.cell.backward_params(store, &step.input, &d_pre)?;
            let dz = d_pre.matmul(&wt)?;
            for (j, &i) in step.active.iter().enumerate() {
                dh_state.row_mut(i).copy_from_slice(&dz.row(j)[self.word_dim..]);
                dc_state.row_mut(i).copy_from_slice(dc_prev.row(j));
            }
        }
        Ok(())
    }
}

/// Finite-difference check of [`SeqLstm`] on a toy problem. Returns the largest
/// relative error over all parameter coordinates.
pub fn lstm_gradient_check(seed: u64) -> Result<Float> {
    let mut rng = RngState::derived(seed, 0x6c73);
    let mut store = ParamStore::new();
    let lstm = SeqLstm::create(&mut store, 3, 4, &mut rng)?;
    let emb = ops::uniform_init(6, 3, -1.0, 1.0, &mut rng)?;
    let sentences: Vec<Vec<usize>> = vec![vec![1, 2, 3, 4], vec![5], vec![2, 2, 0]];
    let refs: Vec<&[usize]> = sentences.iter().map(Vec::as_slice).collect();
    let probe = ops::uniform_init(3, 4, -1.0, 1.0, &mut rng)?;
    let loss = |s: &ParamStore| -> Result<Float> {
        let out = lstm.forward(s, &emb, &refs)?;
        Ok(out.h.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum())
    };
    let out = lstm.forward(&store, &emb, &refs)?;
    lstm.backward(&mut store, &out, &probe)?;
    let analytic: Vec<Matrix> = store.entries().iter().map(|e| e.grad.clone()).collect();
    let numeric = crate::oracles::finite_diff_grad(&mut store, 1e-4, loss)?;
    let mut worst: Float = 0.0;
    for (a, n) in analytic.iter().zip(&numeric) {
        for (x, y) in a.data().iter().zip(n.data()) {
            worst = worst.max(crate::oracles::relative_error(*x, *y));
        }
    }
    Ok(worst)
}

struct Workload {
    embeddings: Matrix,
    tokens: Vec<Vec<usize>>,
    trees: Vec<BinaryTree>,
    transitions: Vec<Vec<Transition>>,
}

fn workload(cfg: &BenchConfig, count: usize, rng: &mut RngState) -> Result<Workload> {
    let embeddings = ops::uniform_init(cfg.vocab, cfg.word_dim, -0.5, 0.5, rng)?;
    let mut tokens = Vec::with_capacity(count);
    let mut trees = Vec::with_capacity(count);
    let mut transitions = Vec::with_capacity(count);
    for _ in 0..count {
        let tree = random_tree(cfg.seq_len, rng);
        tokens.push((0..cfg.seq_len).map(|_| rng.below(cfg.vocab)).collect());
        transitions.push(tree.transitions());
        trees.push(tree);
    }
    Ok(Workload { embeddings, tokens, trees, transitions })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Verifies the encoders agree, then times every (model, batch size) cell.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.repetitions < 3 {
        return Err(SpinnError::Config("benchmarks need at least 3 timed repetitions".into()));
    }
    if cfg.batch_sizes.contains(&0) || cfg.seq_len == 0 || cfg.seq_len > 30 {
        return Err(SpinnError::Config("batch sizes must be positive and seq_len in 1..=30".into()));
    }
    let previous_threads = tensor::threads();
    tensor::set_threads(cfg.threads);
    let result = run_cells(cfg);
    tensor::set_threads(previous_threads);
    result
}

fn run_cells(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rng = RngState::derived(cfg.seed, 0x6265);
    let mut store = ParamStore::new();
    let mut enc_cfg = EncoderConfig::for_variant(Variant::PiNt);
    enc_cfg.dim = cfg.dim;
    enc_cfg.word_dim = cfg.word_dim;
    enc_cfg.max_len = cfg.seq_len;
    let mut encoder = Encoder::create(enc_cfg, &mut store, &mut rng)?;
    for (m, v) in encoder.proj_bn.stats.mean.iter_mut().zip(encoder.proj_bn.stats.var.iter_mut()) {
        *m = rng.uniform(-0.1, 0.1) as Float;
        *v = rng.uniform(0.5, 1.5) as Float;
    }
    let mut lstm_store = ParamStore::new();
    let lstm = SeqLstm::create(&mut lstm_store, cfg.word_dim, cfg.dim, &mut rng)?;

    let largest = cfg.batch_sizes.iter().copied().max().unwrap_or(1).max(cfg.min_sentences);
    let work = workload(cfg, largest, &mut rng)?;
    let mode = RunMode::inference(TransitionMode::Given);

    let check = 8.min(largest);
    let inputs: Vec<SentenceInput<'_>> = (0..check)
        .map(|i| SentenceInput { tokens: &work.tokens[i], transitions: Some(&work.transitions[i]) })
        .collect();
    let fast = encoder.forward(&store, &work.embeddings, &inputs, mode, &mut rng)?;
    let tree_encoder = encoder.clone();
    let tree = TreeRnn::new(&tree_encoder, &store);
    let mut tree_agreement: Float = 0.0;
    for i in 0..check {
        let mut words = work.tokens[i].iter().map(|&t| work.embeddings.row(t));
        let slow = tree.encode(&work.trees[i], &mut words)?;
        for (a, b) in fast.h.row(i).iter().zip(&slow.h) {
            tree_agreement = tree_agreement.max((a - b).abs());
        }
    }
    if !(tree_agreement <= 1e-9) {
        return Err(SpinnError::Internal(format!(
            "thin-stack and recursive encoders disagree (max |dh| = {tree_agreement:e}); refusing to time them"
        )));
    }
    let refs: Vec<&[usize]> = work.tokens[..check].iter().map(Vec::as_slice).collect();
    let batched = lstm.forward(&lstm_store, &work.embeddings, &refs)?;
    let mut lstm_agreement: Float = 0.0;
    for (i, r) in refs.iter().enumerate() {
        let single = lstm.forward(&lstm_store, &work.embeddings, std::slice::from_ref(r))?;
        lstm_agreement = lstm_agreement.max(Matrix::row_vector(batched.h.row(i)).max_abs_diff(&single.h));
    }
    if !(lstm_agreement <= 1e-9) {
        return Err(SpinnError::Internal(format!(
            "batched and single LSTM runs disagree (max |dh| = {lstm_agreement:e}); refusing to time them"
        )));
    }

    struct Plan {
        model: BenchModel,
        batch_size: usize,
        sentences: usize,
        chunks: Vec<usize>,
        reps: Vec<f64>,
        alloc: Option<AllocStats>,
    }
    let mut plans = Vec::new();
    for &model in &cfg.models {
        for &bs in &cfg.batch_sizes {
            let sentences = cfg.min_sentences.max(bs).div_ceil(bs) * bs;
            let chunks = (0..sentences / bs).map(|k| (k * bs) % largest).collect();
            plans.push(Plan { model, batch_size: bs, sentences, chunks, reps: Vec::new(), alloc: None });
        }
    }
    let mut once = |plan: &Plan| -> Result<()> {
        for &start in &plan.chunks {
            let idx: Vec<usize> = (start..start + plan.batch_size).map(|i| i % largest).collect();
            match plan.model {
                BenchModel::ThinStack => {
                    let inputs: Vec<SentenceInput<'_>> = idx
                        .iter()
                        .map(|&i| SentenceInput { tokens: &work.tokens[i], transitions: Some(&work.transitions[i]) })
                        .collect();
                    std::hint::black_box(encoder.forward(&store, &work.embeddings, &inputs, mode, &mut rng)?);
                }
                BenchModel::TreeRnn => {
                    for &i in &idx {
                        let mut words = work.tokens[i].iter().map(|&t| work.embeddings.row(t));
                        std::hint::black_box(tree.encode(&work.trees[i], &mut words)?);
                    }
                }
                BenchModel::Lstm => {
                    let refs: Vec<&[usize]> = idx.iter().map(|&i| work.tokens[i].as_slice()).collect();
                    std::hint::black_box(lstm.forward(&lstm_store, &work.embeddings, &refs)?);
                }
            }
        }
        Ok(())
    };
    for plan in &plans {
        once(plan)?;
    }
    // Repetitions are interleaved across cells so a slow spell on the host lands on
    // every cell rather than skewing one.
    for _ in 0..cfg.repetitions {
        for plan in plans.iter_mut() {
            let before = cfg.alloc_probe.map(|p| p());
            let start = Instant::now();
            once(plan)?;
            plan.reps.push(start.elapsed().as_secs_f64());
            if let (Some(p), Some(b)) = (cfg.alloc_probe, before) {
                let a = p();
                plan.alloc = Some(AllocStats { allocations: a.allocations - b.allocations, bytes: a.bytes - b.bytes });
            }
        }
    }
    let cells = plans
        .into_iter()
        .map(|plan| {
            let med = median(&plan.reps);
            BenchCell {
                model: plan.model,
                batch_size: plan.batch_size,
                sentences: plan.sentences,
                rep_seconds: plan.reps,
                median_seconds: med,
                sentences_per_second: plan.sentences as f64 / med,
                alloc: plan.alloc,
            }
        })
        .collect();
    Ok(BenchReport {
        config: cfg.clone(),
        env: Environment::detect(cfg.threads),
        cells,
        tree_agreement,
        lstm_agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstm_zero_params_single_token_and_gradients() {
        let mut store = ParamStore::new();
        let mut rng = RngState::new(1);
        let lstm = SeqLstm::create(&mut store, 3, 2, &mut rng).unwrap();
        let emb = ops::uniform_init(4, 3, -1.0, 1.0, &mut rng).unwrap();
        let sentence = [1usize, 2, 3];
        let out = lstm.forward(&store, &emb, &[&sentence]).unwrap();
        assert_eq!(out.steps.len(), 3);
        let single = lstm.forward(&store, &emb, &[&[2usize][..]]).unwrap();
        assert_eq!(single.steps.len(), 1);
        store.zero_values();
        let out = lstm.forward(&store, &emb, &[&sentence]).unwrap();
        assert!(out.h.data().iter().all(|&v| v == 0.0));
        assert!(lstm_gradient_check(3).unwrap() < 1e-6);
    }

    #[test]
    fn small_bench_runs_and_agrees() {
        let cfg = BenchConfig {
            batch_sizes: vec![1, 4],
            seq_len: 6,
            dim: 8,
            word_dim: 5,
            vocab: 50,
            min_sentences: 8,
            ..Default::default()
        };
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.cells.len(), 6);
        assert!(r.tree_agreement <= 1e-12);
        assert!(r.json_lines().lines().count() == 6);
        assert!(r.to_string().contains("thin-stack"));
        assert!(r.speedup(BenchModel::ThinStack, 1, 4).is_some());
    }
}
