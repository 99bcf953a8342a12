//! Corpora, embeddings and batching.

mod embeddings;
mod snli;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;

pub use embeddings::{EmbeddingTable, OOV_INDEX, PAD_INDEX};
pub use snli::{
    load_prepared, load_snli, parse_snli_line, read_prepared, read_snli, snli_line, write_prepared, SnliLoad,
};

use crate::error::{Result, SpinnError};
use crate::tensor::RngState;
use crate::transitions::{pad_and_crop, Transition};

/// Labels in classifier output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Entailment = 0,
    Contradiction = 1,
    Neutral = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Label> {
        Label::ALL
            .get(i)
            .copied()
            .ok_or_else(|| SpinnError::Data { line: 0, message: format!("label index {i} outside 0..3") })
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }
}

impl FromStr for Label {
    type Err = SpinnError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entailment" => Ok(Label::Entailment),
            "contradiction" => Ok(Label::Contradiction),
            "neutral" => Ok(Label::Neutral),
            other => Err(SpinnError::Data { line: 0, message: format!("unknown label {other:?}") }),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A labelled premise/hypothesis pair with unpadded transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExamplePair {
    pub premise_tokens: Vec<String>,
    pub premise_transitions: Vec<Transition>,
    pub hypothesis_tokens: Vec<String>,
    pub hypothesis_transitions: Vec<Transition>,
    pub label: Label,
}

/// A sentence ready for the encoder: embedding rows of its real tokens and its
/// transitions padded or cropped to `2N - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparedSentence {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    pub transitions: Vec<Transition>,
}

impl PreparedSentence {
    pub fn new(tokens: &[String], transitions: &[Transition], n: usize, table: &EmbeddingTable) -> Result<Self> {
        let padded = pad_and_crop(tokens, transitions, n)?;
        let real: Vec<String> = padded.tokens[..padded.real_tokens].to_vec();
        let ids = real.iter().map(|t| table.lookup(t)).collect();
        Ok(PreparedSentence { tokens: real, ids, transitions: padded.transitions })
    }

    /// Gold actions excluding padding.
    pub fn real_transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.transitions.iter().copied().filter(|&a| a != Transition::Pad)
    }

    pub fn input(&self) -> crate::encoder::SentenceInput<'_> {
        crate::encoder::SentenceInput { tokens: &self.ids, transitions: Some(&self.transitions) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreparedPair {
    pub premise: PreparedSentence,
    pub hypothesis: PreparedSentence,
    pub label: Label,
}

impl PreparedPair {
    pub fn new(pair: &ExamplePair, n: usize, table: &EmbeddingTable) -> Result<Self> {
        Ok(PreparedPair {
            premise: PreparedSentence::new(&pair.premise_tokens, &pair.premise_transitions, n, table)?,
            hypothesis: PreparedSentence::new(&pair.hypothesis_tokens, &pair.hypothesis_transitions, n, table)?,
            label: pair.label,
        })
    }
}

pub fn prepare_all(pairs: &[ExamplePair], n: usize, table: &EmbeddingTable) -> Result<Vec<PreparedPair>> {
    pairs.iter().map(|p| PreparedPair::new(p, n, table)).collect()
}

/// Splits `0..count` into batches of example indices. With `rng` the order is
/// shuffled first. Training drops the final short batch; evaluation keeps it.
pub fn make_batches(count: usize, batch_size: usize, training: bool, rng: Option<&mut RngState>) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..count).collect();
    if let Some(rng) = rng {
        rng.shuffle(&mut order);
    }
    let size = batch_size.max(1);
    order
        .chunks(size)
        .filter(|c| !training || c.len() == size)
        .map(<[usize]>::to_vec)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_counts_and_determinism() {
        assert_eq!(make_batches(100, 32, true, None).len(), 3);
        assert_eq!(make_batches(100, 32, false, None).len(), 4);
        let a = make_batches(100, 32, true, Some(&mut RngState::new(4)));
        let b = make_batches(100, 32, true, Some(&mut RngState::new(4)));
        assert_eq!(a, b);
        assert_ne!(a, make_batches(100, 32, true, None));
    }

    #[test]
    fn labels_round_trip() {
        for l in Label::ALL {
            assert_eq!(l.name().parse::<Label>().unwrap(), l);
            assert_eq!(Label::from_index(l.index()).unwrap(), l);
        }
        assert!(Label::from_index(3).is_err());
    }
}
