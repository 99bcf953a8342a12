//! Premise and hypothesis encoders with shared parameters feeding the pair classifier.

use std::fmt;

use crate::classifier::{self, Classifier, ClassifierConfig, LossWeights};
use crate::data::{Label, PreparedPair};
use crate::encoder::{choose_transition, EncodeOutput, Encoder, EncoderConfig, RunMode, SentenceInput, TransitionMode};
use crate::error::{Result, SpinnError};
use crate::layers::BatchNorm;
use crate::tensor::{Float, Matrix, ParamStore, RngState};
use crate::transitions::Transition;

/// Premises of this many words or more fall in the long-sentence bucket.
pub const LONG_PREMISE: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub classifier: ClassifierConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.classifier.validate()
    }
}

/// Objective terms of one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub label: Float,
    /// `L_p + L_h` before weighting by `α`.
    pub transition: Float,
    /// `λ‖θ‖²`.
    pub l2: Float,
    pub total: Float,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchResult {
    pub loss: LossParts,
    pub predictions: Vec<Label>,
    pub correct: usize,
    pub transition_correct: usize,
    pub transition_total: usize,
}

/// Accuracy summary over a dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub count: usize,
    pub correct: usize,
    /// `(correct, total)` per gold label in [`Label::ALL`] order.
    pub per_label: [(usize, usize); 3],
    /// `(correct, total)` over non-padding steps, for models with a transition classifier.
    pub transitions: Option<(usize, usize)>,
    /// `(correct, total)` for premises of at least [`LONG_PREMISE`] words.
    pub long_premise: (usize, usize),
    pub mean_loss: Float,
}

fn ratio((a, b): (usize, usize)) -> Float {
    if b == 0 {
        0.0
    } else {
        a as Float / b as Float
    }
}

impl EvalReport {
    pub fn accuracy(&self) -> Float {
        ratio((self.correct, self.count))
    }

    pub fn label_accuracy(&self, l: Label) -> Float {
        ratio(self.per_label[l.index()])
    }

    pub fn transition_accuracy(&self) -> Option<Float> {
        self.transitions.map(ratio)
    }

    pub fn long_premise_accuracy(&self) -> Option<Float> {
        (self.long_premise.1 > 0).then(|| ratio(self.long_premise))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "examples            {}", self.count)?;
        writeln!(f, "accuracy            {:.4}", self.accuracy())?;
        for l in Label::ALL {
            let (c, n) = self.per_label[l.index()];
            writeln!(f, "  {:<17} {:.4} ({c}/{n})", l.name(), self.label_accuracy(l))?;
        }
        match self.transitions {
            Some((c, n)) => writeln!(f, "transition accuracy {:.4} ({c}/{n})", ratio((c, n)))?,
            None => writeln!(f, "transition accuracy n/a")?,
        }
        let (c, n) = self.long_premise;
        match self.long_premise_accuracy() {
            Some(a) => writeln!(f, "premise >= {LONG_PREMISE} words {a:.4} ({c}/{n})")?,
            None => writeln!(f, "premise >= {LONG_PREMISE} words n/a (0 examples)")?,
        }
        write!(f, "mean loss           {:.6}", self.mean_loss)
    }
}

/// The full model: one encoder applied to both sentences and the pair classifier,
/// with all parameters in a single store.
#[derive(Clone, Debug)]
pub struct PairModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub classifier: Classifier,
}

impl PairModel {
    pub fn create(config: ModelConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let encoder = Encoder::create(config.encoder.clone(), &mut store, rng)?;
        let classifier = Classifier::create(config.classifier.clone(), config.encoder.dim, &mut store, rng)?;
        Ok(PairModel { config, store, encoder, classifier })
    }

    /// Every batch-norm layer in a fixed order.
    pub fn batch_norms(&self) -> Vec<&BatchNorm> {
        std::iter::once(&self.encoder.proj_bn).chain(self.classifier.batch_norms()).collect()
    }

    pub fn batch_norms_mut(&mut self) -> Vec<&mut BatchNorm> {
        std::iter::once(&mut self.encoder.proj_bn).chain(self.classifier.batch_norms_mut()).collect()
    }

    fn encode(
        &mut self,
        embeddings: &Matrix,
        batch: &[&PreparedPair],
        mode: RunMode,
        rng: &mut RngState,
    ) -> Result<EncodeOutput> {
        let inputs: Vec<SentenceInput<'_>> = batch
            .iter()
            .map(|p| p.premise.input())
            .chain(batch.iter().map(|p| p.hypothesis.input()))
            .collect();
        self.encoder.forward(&self.store, embeddings, &inputs, mode, rng)
    }

    /// Forward pass over a batch with the full objective. With `backward` the store's
    /// gradients are reset and then hold the gradient of `loss.total`.
    pub fn forward_loss(
        &mut self,
        embeddings: &Matrix,
        batch: &[&PreparedPair],
        weights: LossWeights,
        mode: RunMode,
        backward: bool,
        rng: &mut RngState,
    ) -> Result<BatchResult> {
        weights.validate()?;
        if batch.is_empty() {
            return Err(SpinnError::Config("empty batch".into()));
        }
        if backward && !mode.keep_cache {
            return Err(SpinnError::Config("backward pass needs a cached forward pass".into()));
        }
        let b = batch.len();
        let d = self.encoder.dim();
        let out = self.encode(embeddings, batch, mode, rng)?;
        let hp = Matrix::new(b, d, out.h.data()[..b * d].to_vec())?;
        let hh = Matrix::new(b, d, out.h.data()[b * d..].to_vec())?;
        let features = classifier::pair_features(&hp, &hh)?;
        let (logits, cls_cache) = self.classifier.forward(&self.store, &features, mode.norm, mode.dropout, rng)?;
        let gold: Vec<Label> = batch.iter().map(|p| p.label).collect();
        let (label_loss, d_label) = classifier::label_loss(&logits, &gold)?;

        let gold_seqs: Vec<&[Transition]> = batch
            .iter()
            .map(|p| p.premise.transitions.as_slice())
            .chain(batch.iter().map(|p| p.hypothesis.transitions.as_slice()))
            .collect();
        let mut transition = 0.0;
        let mut d_trans = None;
        let (mut t_correct, mut t_total) = (0, 0);
        if !out.logits.is_empty() {
            let mut dl = vec![Matrix::zeros(2 * b, 2); out.logits.len()];
            transition = classifier::transition_loss(&out.logits, &gold_seqs, 0..b, weights.alpha, &mut dl)?
                + classifier::transition_loss(&out.logits, &gold_seqs, b..2 * b, weights.alpha, &mut dl)?;
            if weights.alpha > 0.0 {
                d_trans = Some(dl);
            }
            for (lane, seq) in gold_seqs.iter().enumerate() {
                for (t, &g) in seq.iter().enumerate() {
                    if g == Transition::Pad {
                        continue;
                    }
                    let chosen = match mode.transitions {
                        TransitionMode::Given => choose_transition(out.logits[t].row(lane)),
                        TransitionMode::Predicted => out.steps[t].records[lane].action,
                    };
                    t_total += 1;
                    t_correct += usize::from(chosen == g);
                }
            }
        }
        let l2 = weights.lambda * self.store.sum_squares();
        let loss = LossParts {
            label: label_loss,
            transition,
            l2,
            total: label_loss + weights.alpha * transition + l2,
        };

        let predictions: Vec<Label> = (0..b)
            .map(|i| {
                let row = logits.row(i);
                let best = (0..classifier::LABELS).fold(0, |m, k| if row[k] > row[m] { k } else { m });
                Label::from_index(best)
            })
            .collect::<Result<_>>()?;
        let correct = predictions.iter().zip(&gold).filter(|(p, g)| p == g).count();

        if backward {
            self.store.zero_grads();
            let dx = self.classifier.backward(&mut self.store, &cls_cache, &d_label)?;
            let (dp, dh) = classifier::pair_features_backward(&hp, &hh, &dx);
            let mut dh_all = dp.into_data();
            dh_all.extend_from_slice(dh.data());
            let dh_all = Matrix::new(2 * b, d, dh_all)?;
            self.encoder.backward(&mut self.store, &out, &dh_all, d_trans.as_deref())?;
            self.store.add_l2_grad(weights.lambda);
        }
        Ok(BatchResult { loss, predictions, correct, transition_correct: t_correct, transition_total: t_total })
    }

    /// Labels for a batch in evaluation mode.
    pub fn predict(
        &mut self,
        embeddings: &Matrix,
        batch: &[&PreparedPair],
        transitions: TransitionMode,
    ) -> Result<Vec<Label>> {
        let mode = RunMode::inference(transitions);
        let r = self.forward_loss(
            embeddings,
            batch,
            LossWeights { alpha: 0.0, lambda: 0.0 },
            mode,
            false,
            &mut RngState::new(0),
        )?;
        Ok(r.predictions)
    }

    /// Evaluation-mode accuracy report. Transition accuracy counts the actions the
    /// encoder executed in `transitions` mode against the gold sequence.
    pub fn evaluate(
        &mut self,
        embeddings: &Matrix,
        pairs: &[PreparedPair],
        batch_size: usize,
        transitions: TransitionMode,
        weights: LossWeights,
    ) -> Result<EvalReport> {
        let mut report = EvalReport::default();
        let mut loss_sum = 0.0;
        let mut t = (0, 0);
        let mode = RunMode::inference(transitions);
        let mut rng = RngState::new(0);
        for idx in crate::data::make_batches(pairs.len(), batch_size, false, None) {
            let batch: Vec<&PreparedPair> = idx.iter().map(|&i| &pairs[i]).collect();
            let r = self.forward_loss(embeddings, &batch, weights, mode, false, &mut rng)?;
            loss_sum += r.loss.total * batch.len() as Float;
            t.0 += r.transition_correct;
            t.1 += r.transition_total;
            for (p, pred) in batch.iter().zip(&r.predictions) {
                let ok = usize::from(*pred == p.label);
                report.count += 1;
                report.correct += ok;
                let slot = &mut report.per_label[p.label.index()];
                slot.0 += ok;
                slot.1 += 1;
                if p.premise.tokens.len() >= LONG_PREMISE {
                    report.long_premise.0 += ok;
                    report.long_premise.1 += 1;
                }
            }
        }
        if self.encoder.head.is_some() {
            report.transitions = Some(t);
        }
        report.mean_loss = if report.count > 0 { loss_sum / report.count as Float } else { 0.0 };
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic, EmbeddingTable, PreparedPair};
    use crate::encoder::Variant;

    fn tiny(variant: Variant) -> (PairModel, EmbeddingTable, Vec<PreparedPair>) {
        let pairs = synthetic::toy_pairs(6, 1);
        let table = EmbeddingTable::synthetic(synthetic::vocabulary(), 5, 3).unwrap();
        let mut enc = EncoderConfig::for_variant(variant);
        enc.dim = 4;
        enc.tracker_dim = 3;
        enc.word_dim = 5;
        enc.max_len = 9;
        let cfg = ModelConfig { encoder: enc, classifier: ClassifierConfig { layers: 1, hidden: 6, ..Default::default() } };
        let model = PairModel::create(cfg, &mut RngState::new(2)).unwrap();
        let prepared = crate::data::prepare_all(&pairs, 9, &table).unwrap();
        (model, table, prepared)
    }

    #[test]
    fn total_is_sum_of_parts() {
        let (mut m, table, data) = tiny(Variant::Full);
        let batch: Vec<&PreparedPair> = data.iter().collect();
        let w = LossWeights { alpha: 3.9, lambda: 1e-3 };
        let r = m.forward_loss(table.matrix(), &batch, w, RunMode::CHECK, true, &mut RngState::new(0)).unwrap();
        let p = r.loss;
        assert!((p.total - (p.label + 3.9 * p.transition + p.l2)).abs() < 1e-12);
        assert!((p.l2 - 1e-3 * m.store.sum_squares()).abs() < 1e-15);
        assert!(r.transition_total > 0);
    }

    #[test]
    fn alpha_zero_leaves_only_l2_on_the_head() {
        let (mut m, table, data) = tiny(Variant::Pi);
        let batch: Vec<&PreparedPair> = data.iter().collect();
        let w = LossWeights { alpha: 0.0, lambda: 0.0 };
        m.forward_loss(table.matrix(), &batch, w, RunMode::TRAIN, true, &mut RngState::new(0)).unwrap();
        let head = m.encoder.head.unwrap();
        assert!(m.store.grad(head.w).data().iter().all(|&g| g == 0.0));
        assert!(m.store.grad(head.b).data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn report_counts() {
        let (mut m, table, data) = tiny(Variant::Full);
        let w = LossWeights { alpha: 1.0, lambda: 0.0 };
        let r = m.evaluate(table.matrix(), &data, 4, TransitionMode::Predicted, w).unwrap();
        assert_eq!(r.count, 6);
        assert_eq!(r.per_label.iter().map(|x| x.1).sum::<usize>(), 6);
        assert!(r.transitions.is_some());
        assert!(r.to_string().contains("accuracy"));
    }
}
