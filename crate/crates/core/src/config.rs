//! Flat `key = value` run configuration shared by training, evaluation and the CLI.
//!
//! Values resolve in three layers: defaults for the chosen variant, then a config
//! file, then command-line overrides. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::classifier::{ClassifierConfig, LossWeights};
use crate::encoder::{EncoderConfig, TransitionMode, Variant};
use crate::error::{Result, SpinnError};
use crate::model::ModelConfig;
use crate::tensor::ops::BatchNormConfig;
use crate::tensor::Float;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub data: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub word_dim: usize,
    pub dim: usize,
    pub tracker_dim: usize,
    pub seq_len: usize,
    pub transition_mode: TransitionMode,
    pub swap_forget: bool,
    pub enforce_valid: bool,
    pub embed_keep: Float,
    pub mlp_layers: usize,
    pub mlp_hidden: usize,
    pub mlp_keep: Float,
    pub lr: Float,
    pub lr_decay: Float,
    pub decay_steps: usize,
    pub l2: Float,
    pub alpha: Float,
    pub rho: Float,
    pub epsilon: Float,
    pub clip: Float,
    pub batch_size: usize,
    pub max_steps: usize,
    pub eval_interval: usize,
    pub patience: usize,
    pub seed: u64,
    pub train_limit: usize,
    pub dev_limit: usize,
    pub bn_eps: Float,
    pub bn_momentum: Float,
}

/// Every accepted key with a one-line description, in output order.
pub const KEYS: &[(&str, &str)] = &[
    ("variant", "pi_nt, pi or full"),
    ("data", "directory with train.jsonl and dev.jsonl, or an SNLI-format file"),
    ("glove", "GloVe text file; synthetic vectors when unset"),
    ("word_dim", "embedding width"),
    ("dim", "model dimension D"),
    ("tracker_dim", "tracking LSTM width"),
    ("seq_len", "tokens per sentence after padding or cropping (N)"),
    ("transition_mode", "given or predicted, used at evaluation time"),
    ("swap_forget", "pair f_l with the stack top instead of the left child"),
    ("enforce_valid", "mask impossible predicted transitions"),
    ("embed_keep", "dropout keep rate after the word projection"),
    ("mlp_layers", "hidden classifier layers, 0 to 3"),
    ("mlp_hidden", "hidden classifier width"),
    ("mlp_keep", "dropout keep rate in the classifier"),
    ("lr", "initial learning rate"),
    ("lr_decay", "learning-rate factor applied every decay_steps"),
    ("decay_steps", "steps between learning-rate decays"),
    ("l2", "L2 coefficient lambda"),
    ("alpha", "transition loss weight"),
    ("rho", "RMSProp decay"),
    ("epsilon", "RMSProp epsilon"),
    ("clip", "global gradient-norm clip, 0 disables"),
    ("batch_size", "examples per step"),
    ("max_steps", "training steps"),
    ("eval_interval", "steps between dev evaluations"),
    ("patience", "stop after this many evaluations without improvement, 0 disables"),
    ("seed", "seed for initialisation, shuffling, dropout and synthetic vectors"),
    ("train_limit", "use only the first n training pairs, 0 for all"),
    ("dev_limit", "use only the first n dev pairs, 0 for all"),
    ("bn_eps", "batch-norm epsilon"),
    ("bn_momentum", "batch-norm running-average momentum"),
];

fn bad(key: &str, value: &str, what: &str) -> SpinnError {
    SpinnError::Config(format!("{key} = {value:?}: expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value, "a boolean")),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Defaults for `variant`, taken from its best reported run.
    pub fn for_variant(variant: Variant) -> Self {
        let enc = EncoderConfig::for_variant(variant);
        let (lr, l2, alpha, mlp_keep, mlp_layers) = match variant {
            Variant::PiNt => (3e-4, 3e-6, 0.0, 0.94, 2),
            Variant::Pi => (7e-3, 2e-5, 0.0, 0.93, 2),
            Variant::Full => (2e-3, 3e-5, 3.9, 0.94, 1),
        };
        let bn = BatchNormConfig::default();
        RunConfig {
            variant,
            data: None,
            glove: None,
            word_dim: enc.word_dim,
            dim: enc.dim,
            tracker_dim: if variant.has_tracker() { enc.tracker_dim } else { 0 },
            seq_len: enc.max_len,
            transition_mode: enc.transition_mode,
            swap_forget: enc.swap_forget,
            enforce_valid: enc.enforce_valid,
            embed_keep: enc.embed_keep,
            mlp_layers,
            mlp_hidden: 1024,
            mlp_keep,
            lr,
            lr_decay: 0.75,
            decay_steps: 10_000,
            l2,
            alpha,
            rho: 0.9,
            epsilon: 1e-6,
            clip: 0.0,
            batch_size: 32,
            max_steps: 250_000,
            eval_interval: 1000,
            patience: 0,
            seed: 1,
            train_limit: 0,
            dev_limit: 0,
            bn_eps: bn.eps,
            bn_momentum: bn.momentum,
        }
    }

    /// Resolves `pairs` in order on top of the defaults of the variant they name
    /// (the last `variant` entry wins, default `pi`).
    pub fn resolve(pairs: &[(String, String)]) -> Result<Self> {
        let variant = match pairs.iter().rev().find(|(k, _)| k == "variant") {
            Some((_, v)) => v.parse()?,
            None => Variant::Pi,
        };
        let mut cfg = RunConfig::for_variant(variant);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "variant" => self.variant = v.parse()?,
            "data" => self.data = path(v),
            "glove" => self.glove = path(v),
            "word_dim" => self.word_dim = num(key, v, "a positive integer")?,
            "dim" => self.dim = num(key, v, "a positive integer")?,
            "tracker_dim" => self.tracker_dim = num(key, v, "an integer")?,
            "seq_len" => self.seq_len = num(key, v, "a positive integer")?,
            "transition_mode" => self.transition_mode = v.parse()?,
            "swap_forget" => self.swap_forget = flag(key, v)?,
            "enforce_valid" => self.enforce_valid = flag(key, v)?,
            "embed_keep" => self.embed_keep = num(key, v, "a number")?,
            "mlp_layers" => self.mlp_layers = num(key, v, "an integer")?,
            "mlp_hidden" => self.mlp_hidden = num(key, v, "an integer")?,
            "mlp_keep" => self.mlp_keep = num(key, v, "a number")?,
            "lr" => self.lr = num(key, v, "a number")?,
            "lr_decay" => self.lr_decay = num(key, v, "a number")?,
            "decay_steps" => self.decay_steps = num(key, v, "a positive integer")?,
            "l2" => self.l2 = num(key, v, "a number")?,
            "alpha" => self.alpha = num(key, v, "a number")?,
            "rho" => self.rho = num(key, v, "a number")?,
            "epsilon" => self.epsilon = num(key, v, "a number")?,
            "clip" => self.clip = num(key, v, "a number")?,
            "batch_size" => self.batch_size = num(key, v, "an integer")?,
            "max_steps" => self.max_steps = num(key, v, "an integer")?,
            "eval_interval" => self.eval_interval = num(key, v, "a positive integer")?,
            "patience" => self.patience = num(key, v, "an integer")?,
            "seed" => self.seed = num(key, v, "an unsigned integer")?,
            "train_limit" => self.train_limit = num(key, v, "an integer")?,
            "dev_limit" => self.dev_limit = num(key, v, "an integer")?,
            "bn_eps" => self.bn_eps = num(key, v, "a number")?,
            "bn_momentum" => self.bn_momentum = num(key, v, "a number")?,
            _ => return Err(SpinnError::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.weights().validate()?;
        let rate = |name: &str, x: Float| {
            if x > 0.0 && x <= 1.0 {
                Ok(())
            } else {
                Err(SpinnError::Config(format!("{name} must be in (0, 1], got {x}")))
            }
        };
        rate("lr_decay", self.lr_decay)?;
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(SpinnError::Config(format!("rho must be in [0, 1), got {}", self.rho)));
        }
        if !(self.lr > 0.0 && self.epsilon > 0.0 && self.clip >= 0.0) {
            return Err(SpinnError::Config("lr and epsilon must be positive, clip non-negative".into()));
        }
        if self.batch_size < 2 {
            return Err(SpinnError::Config("batch_size must be at least 2 for batch normalisation".into()));
        }
        if self.eval_interval == 0 || self.decay_steps == 0 {
            return Err(SpinnError::Config("eval_interval and decay_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelConfig {
        let bn = BatchNormConfig { eps: self.bn_eps, momentum: self.bn_momentum };
        ModelConfig {
            encoder: EncoderConfig {
                variant: self.variant,
                dim: self.dim,
                tracker_dim: self.tracker_dim,
                word_dim: self.word_dim,
                max_len: self.seq_len,
                transition_mode: self.transition_mode,
                swap_forget: self.swap_forget,
                enforce_valid: self.enforce_valid,
                embed_keep: self.embed_keep,
                bn,
            },
            classifier: ClassifierConfig { layers: self.mlp_layers, hidden: self.mlp_hidden, keep: self.mlp_keep, bn },
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { alpha: if self.variant.has_tracker() { self.alpha } else { 0.0 }, lambda: self.l2 }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let p = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        Some(match key {
            "variant" => self.variant.to_string(),
            "data" => p(&self.data),
            "glove" => p(&self.glove),
            "word_dim" => self.word_dim.to_string(),
            "dim" => self.dim.to_string(),
            "tracker_dim" => self.tracker_dim.to_string(),
            "seq_len" => self.seq_len.to_string(),
            "transition_mode" => self.transition_mode.to_string(),
            "swap_forget" => self.swap_forget.to_string(),
            "enforce_valid" => self.enforce_valid.to_string(),
            "embed_keep" => self.embed_keep.to_string(),
            "mlp_layers" => self.mlp_layers.to_string(),
            "mlp_hidden" => self.mlp_hidden.to_string(),
            "mlp_keep" => self.mlp_keep.to_string(),
            "lr" => self.lr.to_string(),
            "lr_decay" => self.lr_decay.to_string(),
            "decay_steps" => self.decay_steps.to_string(),
            "l2" => self.l2.to_string(),
            "alpha" => self.alpha.to_string(),
            "rho" => self.rho.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "clip" => self.clip.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "eval_interval" => self.eval_interval.to_string(),
            "patience" => self.patience.to_string(),
            "seed" => self.seed.to_string(),
            "train_limit" => self.train_limit.to_string(),
            "dev_limit" => self.dev_limit.to_string(),
            "bn_eps" => self.bn_eps.to_string(),
            "bn_momentum" => self.bn_momentum.to_string(),
            _ => return None,
        })
    }

    /// Every key as `key = value`, one per line. Parsing this back gives an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("listed key"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        RunConfig::resolve(&parse_pairs(text)?)
    }
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SpinnError::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_and_layering() {
        let pairs = parse_pairs("variant = full\n# comment\ndim = 64\nlr=0.01\n").unwrap();
        let cfg = RunConfig::resolve(&pairs).unwrap();
        assert_eq!(cfg.variant, Variant::Full);
        assert_eq!(cfg.alpha, 3.9);
        assert_eq!((cfg.dim, cfg.lr), (64, 0.01));
        assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.to_text().lines().count(), KEYS.len());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::resolve(&[("dimm".into(), "3".into())]).is_err());
        assert!(RunConfig::resolve(&[("dim".into(), "x".into())]).is_err());
        assert!(RunConfig::resolve(&[("batch_size".into(), "1".into())]).is_err());
        assert!(parse_pairs("novalue\n").is_err());
    }

    #[test]
    fn variant_defaults() {
        let full = RunConfig::for_variant(Variant::Full);
        assert_eq!((full.lr, full.l2, full.alpha, full.tracker_dim, full.mlp_layers), (2e-3, 3e-5, 3.9, 79, 1));
        assert_eq!((full.embed_keep, full.mlp_keep), (0.86, 0.94));
        let pi = RunConfig::for_variant(Variant::Pi);
        assert_eq!((pi.lr, pi.l2, pi.tracker_dim), (7e-3, 2e-5, 61));
        let nt = RunConfig::for_variant(Variant::PiNt);
        assert_eq!((nt.lr, nt.l2, nt.embed_keep, nt.mlp_keep), (3e-4, 3e-6, 0.83, 0.94));
        assert_eq!(nt.weights().alpha, 0.0);
    }
}
