//! Whole-model gradient check against central finite differences.

use std::fmt;

use crate::classifier::{ClassifierConfig, LossWeights};
use crate::data::{Label, PreparedPair, PreparedSentence};
use crate::encoder::{EncoderConfig, RunMode, Variant};
use crate::error::Result;
use crate::model::{ModelConfig, PairModel};
use crate::oracles::{finite_diff_grad, relative_error};
use crate::tensor::{Float, Matrix, RngState};
use crate::transitions::{pad_and_crop, random_tree};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub variant: Variant,
    pub dim: usize,
    pub tracker_dim: usize,
    pub word_dim: usize,
    /// Longest sentence in tokens; also the padded length.
    pub max_len: usize,
    pub batch: usize,
    pub mlp_layers: usize,
    pub mlp_hidden: usize,
    pub alpha: Float,
    pub lambda: Float,
    pub step: Float,
    pub tolerance: Float,
    pub seed: u64,
}

impl GradCheckConfig {
    pub fn toy(variant: Variant, seed: u64) -> Self {
        GradCheckConfig {
            variant,
            dim: 6,
            tracker_dim: 4,
            word_dim: 5,
            max_len: 6,
            batch: 3,
            mlp_layers: 1,
            mlp_hidden: 7,
            alpha: if variant == Variant::Full { 3.9 } else { 0.0 },
            lambda: 1e-3,
            step: 1e-4,
            tolerance: 1e-4,
            seed,
        }
    }
}

/// Worst coordinate of one parameter block.
#[derive(Clone, Debug)]
pub struct BlockResult {
    pub name: String,
    pub coordinates: usize,
    pub max_relative_error: Float,
    pub worst: (Float, Float),
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub variant: Variant,
    pub tolerance: Float,
    pub blocks: Vec<BlockResult>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> Float {
        self.blocks.iter().map(|b| b.max_relative_error).fold(0.0, Float::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_relative_error <= self.tolerance)
    }

    pub fn coordinates(&self) -> usize {
        self.blocks.iter().map(|b| b.coordinates).sum()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            let verdict = if b.max_relative_error <= self.tolerance { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "{verdict} {:<16} {:>5} coords  max rel err {:.3e}  (analytic {:.6e}, numeric {:.6e})",
                b.name, b.coordinates, b.max_relative_error, b.worst.0, b.worst.1
            )?;
        }
        write!(
            f,
            "{} {}: {} coordinates, max rel err {:.3e} (tolerance {:.0e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.variant,
            self.coordinates(),
            self.max_relative_error(),
            self.tolerance
        )
    }
}

fn random_sentence(rng: &mut RngState, vocab: usize, max_len: usize) -> PreparedSentence {
    let n = 1 + rng.below(max_len);
    let tree = random_tree(n, rng);
    let tokens: Vec<String> = tree.leaves().iter().map(|s| s.to_string()).collect();
    let padded = pad_and_crop(&tokens, &tree.transitions(), max_len).expect("n <= max_len");
    PreparedSentence {
        tokens,
        ids: (0..n).map(|_| 1 + rng.below(vocab - 1)).collect(),
        transitions: padded.transitions,
    }
}

/// Builds a random toy model and batch, then compares the analytic gradient of the
/// full objective with finite differences on every parameter coordinate. Batch norm
/// runs on randomised running statistics and dropout is off.
pub fn run(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = RngState::derived(cfg.seed, 0x6763);
    let mut enc = EncoderConfig::for_variant(cfg.variant);
    enc.dim = cfg.dim;
    enc.tracker_dim = cfg.tracker_dim;
    enc.word_dim = cfg.word_dim;
    enc.max_len = cfg.max_len;
    let classifier = ClassifierConfig { layers: cfg.mlp_layers, hidden: cfg.mlp_hidden, keep: 1.0, ..Default::default() };
    let mut model = PairModel::create(ModelConfig { encoder: enc, classifier }, &mut rng)?;

    for e in model.store.entries_mut() {
        for v in e.value.data_mut() {
            *v += rng.uniform(-0.2, 0.2) as Float;
        }
    }
    for bn in model.batch_norms_mut() {
        for (m, v) in bn.stats.mean.iter_mut().zip(bn.stats.var.iter_mut()) {
            *m = rng.uniform(-0.3, 0.3) as Float;
            *v = rng.uniform(0.5, 1.5) as Float;
        }
    }
    let vocab = 12;
    let mut table = Matrix::zeros(vocab, cfg.word_dim);
    for v in table.data_mut()[cfg.word_dim..].iter_mut() {
        *v = rng.uniform(-1.0, 1.0) as Float;
    }
    let pairs: Vec<PreparedPair> = (0..cfg.batch)
        .map(|i| PreparedPair {
            premise: random_sentence(&mut rng, vocab, cfg.max_len),
            hypothesis: random_sentence(&mut rng, vocab, cfg.max_len),
            label: Label::ALL[i % 3],
        })
        .collect();
    let batch: Vec<&PreparedPair> = pairs.iter().collect();
    let weights = LossWeights { alpha: cfg.alpha, lambda: cfg.lambda };

    let mut scratch = RngState::new(0);
    model.forward_loss(&table, &batch, weights, RunMode::CHECK, true, &mut scratch)?;
    let analytic: Vec<Matrix> = model.store.entries().iter().map(|e| e.grad.clone()).collect();

    let mut probe = model.clone();
    let mut store = std::mem::take(&mut model.store);
    let numeric = finite_diff_grad(&mut store, cfg.step, |s| {
        probe.store = s.clone();
        Ok(probe.forward_loss(&table, &batch, weights, RunMode::CHECK, false, &mut scratch)?.loss.total)
    })?;

    let blocks = store
        .entries()
        .iter()
        .zip(analytic.iter().zip(&numeric))
        .map(|(e, (a, n))| {
            let mut worst = (0.0, 0.0);
            let mut max = 0.0;
            for (&x, &y) in a.data().iter().zip(n.data()) {
                let r = relative_error(x, y);
                if r > max || (max == 0.0 && worst == (0.0, 0.0)) {
                    max = r;
                    worst = (x, y);
                }
            }
            BlockResult { name: e.name.clone(), coordinates: a.len(), max_relative_error: max, worst }
        })
        .collect();
    Ok(GradCheckReport { variant: cfg.variant, tolerance: cfg.tolerance, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_variants_pass_at_toy_scale() {
        for v in Variant::ALL {
            let report = run(&GradCheckConfig::toy(v, 1)).unwrap();
            assert!(report.passed(), "{report}");
        }
    }
}
