//! RMSProp training with step-decayed learning rate, periodic dev evaluation,
//! best-on-dev snapshots and exact resumption from checkpoints.

use std::fmt;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::data::{make_batches, PreparedPair};
use crate::encoder::RunMode;
use crate::error::{Result, SpinnError};
use crate::model::{BatchResult, EvalReport, PairModel};
use crate::tensor::{Float, Matrix, ParamStore, RngState};

const INIT_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const EPOCH_STREAM: u64 = 1 << 32;

/// `lr0 · decay^⌊step / every⌋`.
pub fn lr_schedule(lr0: Float, decay: Float, every: usize, step: usize) -> Float {
    lr0 * decay.powi((step / every.max(1)) as i32)
}

/// `rms ← ρ·rms + (1−ρ)·g²`, `θ ← θ − lr·g/√(rms + ε)`, then clears the gradients.
pub fn rmsprop_step(store: &mut ParamStore, rms: &mut [Matrix], lr: Float, rho: Float, epsilon: Float) {
    for (e, r) in store.entries_mut().iter_mut().zip(rms.iter_mut()) {
        for ((v, g), s) in e.value.data_mut().iter_mut().zip(e.grad.data_mut()).zip(r.data_mut()) {
            *s = rho * *s + (1.0 - rho) * *g * *g;
            *v -= lr * *g / (*s + epsilon).sqrt();
            *g = 0.0;
        }
    }
}

/// Rescales gradients to global norm `max_norm` when above it. Returns the original norm.
pub fn clip_gradients(store: &mut ParamStore, max_norm: Float) -> Float {
    let norm = store.grad_norm();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for e in store.entries_mut() {
            e.grad.scale(s);
        }
    }
    norm
}

/// One line of the training log, written at every dev evaluation.
#[derive(Clone, Debug)]
pub struct EvalLog {
    pub step: usize,
    pub lr: Float,
    /// Mean total loss over the training batches since the previous evaluation.
    pub train_loss: Float,
    pub train_accuracy: Float,
    pub dev: EvalReport,
    pub improved: bool,
}

impl fmt::Display for EvalLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {:>7}  lr {:.3e}  train_loss {:.5}  train_acc {:.4}  dev_acc {:.4}  trans_acc {}{}",
            self.step,
            self.lr,
            self.train_loss,
            self.train_accuracy,
            self.dev.accuracy(),
            self.dev.transition_accuracy().map_or("n/a".to_string(), |a| format!("{a:.4}")),
            if self.improved { "  *" } else { "" }
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub steps: usize,
    pub best_dev: Float,
    pub best_step: usize,
    pub stopped_early: bool,
}

/// Training state over a [`PairModel`].
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: RunConfig,
    pub model: PairModel,
    pub step: usize,
    pub best_dev: Float,
    pub best_step: usize,
    rms: Vec<Matrix>,
    rng: RngState,
    epoch_order: Option<(usize, Vec<Vec<usize>>)>,
    /// Snapshot taken at the best dev evaluation so far.
    pub best: Option<Checkpoint>,
}

fn zeros_like(store: &ParamStore) -> Vec<Matrix> {
    store.entries().iter().map(|e| Matrix::zeros(e.value.rows(), e.value.cols())).collect()
}

impl Trainer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let model = PairModel::create(config.model(), &mut RngState::derived(config.seed, INIT_STREAM))?;
        Ok(Trainer {
            rms: zeros_like(&model.store),
            rng: RngState::derived(config.seed, DROPOUT_STREAM),
            config,
            model,
            step: 0,
            best_dev: -1.0,
            best_step: 0,
            epoch_order: None,
            best: None,
        })
    }

    /// Restores a trainer exactly as it was when `ck` was taken.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config = RunConfig::from_text(&ck.config)?;
        let mut t = Trainer::new(config)?;
        restore_model(&mut t.model, ck)?;
        for (e, r) in t.model.store.entries().iter().zip(t.rms.iter_mut()) {
            let m = ck.tensor(&format!("rms/{}", e.name))?;
            if m.shape() != r.shape() {
                return Err(SpinnError::Format(format!("rms/{} has shape {:?}", e.name, m.shape())));
            }
            *r = m.clone();
        }
        t.rng = RngState::from_bytes(&ck.rng)?;
        t.step = ck.step as usize;
        t.best_dev = ck.best_dev as Float;
        t.best_step = ck.best_step as usize;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut tensors = model_tensors(&self.model);
        for (e, r) in self.model.store.entries().iter().zip(&self.rms) {
            tensors.push((format!("rms/{}", e.name), r.clone()));
        }
        Checkpoint {
            config: self.config.to_text(),
            step: self.step as u64,
            best_dev: self.best_dev,
            best_step: self.best_step as u64,
            rng: self.rng.to_bytes(),
            tensors,
        }
    }

    pub fn lr(&self) -> Float {
        lr_schedule(self.config.lr, self.config.lr_decay, self.config.decay_steps, self.step)
    }

    fn batch_indices(&mut self, n: usize) -> Result<Vec<usize>> {
        let bs = self.config.batch_size;
        let per_epoch = n / bs;
        if per_epoch == 0 {
            return Err(SpinnError::Config(format!("{n} training pairs cannot fill one batch of {bs}")));
        }
        let epoch = self.step / per_epoch;
        if self.epoch_order.as_ref().is_none_or(|(e, _)| *e != epoch) {
            let mut rng = RngState::derived(self.config.seed, EPOCH_STREAM + epoch as u64);
            self.epoch_order = Some((epoch, make_batches(n, bs, true, Some(&mut rng))));
        }
        let (_, order) = self.epoch_order.as_ref().expect("just filled");
        Ok(order[self.step % per_epoch].clone())
    }

    /// One optimisation step on the next batch.
    pub fn train_step(&mut self, embeddings: &Matrix, train: &[PreparedPair]) -> Result<BatchResult> {
        let idx = self.batch_indices(train.len())?;
        let batch: Vec<&PreparedPair> = idx.iter().map(|&i| &train[i]).collect();
        let weights = self.config.weights();
        let r = self.model.forward_loss(embeddings, &batch, weights, RunMode::TRAIN, true, &mut self.rng)?;
        if !r.loss.total.is_finite() {
            let culprit = self.model.store.first_non_finite().unwrap_or("none (loss only)").to_string();
            return Err(SpinnError::NonFinite(format!(
                "loss {} at step {}; first non-finite parameter or gradient: {culprit}",
                r.loss.total, self.step
            )));
        }
        if self.config.clip > 0.0 {
            clip_gradients(&mut self.model.store, self.config.clip);
        }
        let lr = self.lr();
        rmsprop_step(&mut self.model.store, &mut self.rms, lr, self.config.rho, self.config.epsilon);
        if let Some(name) = self.model.store.first_non_finite() {
            return Err(SpinnError::NonFinite(format!("parameter {name} after update at step {}", self.step)));
        }
        self.step += 1;
        Ok(r)
    }

    pub fn evaluate(&mut self, embeddings: &Matrix, pairs: &[PreparedPair]) -> Result<EvalReport> {
        let mode = self.config.transition_mode;
        let weights = self.config.weights();
        self.model.evaluate(embeddings, pairs, self.config.batch_size.max(32), mode, weights)
    }

    /// Trains until `max_steps`, evaluating on `dev` every `eval_interval` steps and
    /// at the end. `log` sees each evaluation with the trainer as it stands (for
    /// periodic checkpoints) and may stop training by returning false.
    pub fn run(
        &mut self,
        embeddings: &Matrix,
        train: &[PreparedPair],
        dev: &[PreparedPair],
        log: &mut dyn FnMut(&EvalLog, &Trainer) -> bool,
    ) -> Result<TrainSummary> {
        let (mut loss_sum, mut correct, mut seen, mut batches) = (0.0, 0usize, 0usize, 0usize);
        let mut stopped_early = false;
        while self.step < self.config.max_steps {
            let lr = self.lr();
            let r = self.train_step(embeddings, train)?;
            loss_sum += r.loss.total;
            correct += r.correct;
            seen += r.predictions.len();
            batches += 1;
            if !self.step.is_multiple_of(self.config.eval_interval) && self.step != self.config.max_steps {
                continue;
            }
            let dev_report = self.evaluate(embeddings, dev)?;
            let improved = dev_report.accuracy() > self.best_dev;
            if improved {
                self.best_dev = dev_report.accuracy();
                self.best_step = self.step;
                self.best = Some(self.checkpoint());
            }
            let entry = EvalLog {
                step: self.step,
                lr,
                train_loss: loss_sum / batches.max(1) as Float,
                train_accuracy: correct as Float / seen.max(1) as Float,
                dev: dev_report,
                improved,
            };
            (loss_sum, correct, seen, batches) = (0.0, 0, 0, 0);
            let evals_since_best = (self.step - self.best_step) / self.config.eval_interval;
            let patience_out = self.config.patience > 0 && evals_since_best >= self.config.patience;
            if !log(&entry, self) || patience_out {
                stopped_early = self.step < self.config.max_steps;
                break;
            }
        }
        Ok(TrainSummary { steps: self.step, best_dev: self.best_dev, best_step: self.best_step, stopped_early })
    }
}

/// Parameters and batch-norm running statistics.
pub fn model_tensors(model: &PairModel) -> Vec<(String, Matrix)> {
    let mut out: Vec<(String, Matrix)> =
        model.store.entries().iter().map(|e| (format!("param/{}", e.name), e.value.clone())).collect();
    for bn in model.batch_norms() {
        out.push((format!("bn/{}/mean", bn.name), Matrix::row_vector(&bn.stats.mean)));
        out.push((format!("bn/{}/var", bn.name), Matrix::row_vector(&bn.stats.var)));
    }
    out
}

/// Loads parameters and running statistics from `ck` into a model of matching shape.
pub fn restore_model(model: &mut PairModel, ck: &Checkpoint) -> Result<()> {
    for e in model.store.entries_mut() {
        let m = ck.tensor(&format!("param/{}", e.name))?;
        if m.shape() != e.value.shape() {
            return Err(SpinnError::Format(format!(
                "param/{} has shape {:?}, model expects {:?}",
                e.name,
                m.shape(),
                e.value.shape()
            )));
        }
        e.value = m.clone();
    }
    for bn in model.batch_norms_mut() {
        for (suffix, target) in [("mean", &mut bn.stats.mean), ("var", &mut bn.stats.var)] {
            let m = ck.tensor(&format!("bn/{}/{suffix}", bn.name))?;
            if m.len() != target.len() {
                return Err(SpinnError::Format(format!("bn/{}/{suffix} has {} entries", bn.name, m.len())));
            }
            target.copy_from_slice(m.data());
        }
    }
    Ok(())
}

/// Rebuilds the model stored in a checkpoint, for evaluation or encoding.
pub fn load_model(ck: &Checkpoint) -> Result<(RunConfig, PairModel)> {
    let config = RunConfig::from_text(&ck.config)?;
    let mut model = PairModel::create(config.model(), &mut RngState::derived(config.seed, INIT_STREAM))?;
    restore_model(&mut model, ck)?;
    Ok((config, model))
}
