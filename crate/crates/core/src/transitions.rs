//! The shift-reduce transition system: conversion between unlabeled binary parses
//! and SHIFT/REDUCE sequences, validity checking, and fixed-length padding.

use std::fmt;

use crate::error::{Result, SpinnError};
use crate::tensor::RngState;

/// The empty token used for padding slots.
pub const PAD_TOKEN: &str = "";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    Reduce,
    /// Left padding: a SHIFT of an empty token, which pushes the zero pair
    /// without consuming a buffer slot.
    Pad,
}

impl Transition {
    pub fn symbol(self) -> char {
        match self {
            Transition::Shift => 'S',
            Transition::Reduce => 'R',
            Transition::Pad => 'P',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transition::Shift => "SHIFT",
            Transition::Reduce => "REDUCE",
            Transition::Pad => "PAD",
        }
    }

    /// Class index for the transition classifier: SHIFT = 0, REDUCE = 1.
    pub fn class(self) -> Option<usize> {
        match self {
            Transition::Shift => Some(0),
            Transition::Reduce => Some(1),
            Transition::Pad => None,
        }
    }

    pub fn from_class(class: usize) -> Transition {
        if class == 0 {
            Transition::Shift
        } else {
            Transition::Reduce
        }
    }

    /// Accepts `S`/`R`/`P`, the full names, or `0`/`1`.
    pub fn parse(s: &str) -> Option<Transition> {
        match s.to_ascii_uppercase().as_str() {
            "S" | "SHIFT" | "0" => Some(Transition::Shift),
            "R" | "REDUCE" | "1" => Some(Transition::Reduce),
            "P" | "PAD" => Some(Transition::Pad),
            _ => None,
        }
    }
}

/// Parses a whitespace- or comma-separated list such as `"S S R"` or `"SSR"`.
pub fn parse_transitions(s: &str) -> Result<Vec<Transition>> {
    let parts: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == ',').filter(|p| !p.is_empty()).collect();
    let parts: Vec<String> = if parts.len() == 1 && parts[0].len() > 1 && Transition::parse(parts[0]).is_none() {
        parts[0].chars().map(String::from).collect()
    } else {
        parts.iter().map(|p| p.to_string()).collect()
    };
    parts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Transition::parse(p).ok_or_else(|| SpinnError::Parse {
                position: i,
                message: format!("unknown transition {p:?}"),
            })
        })
        .collect()
}

pub fn format_transitions(seq: &[Transition]) -> String {
    seq.iter().map(|t| t.symbol().to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Violation {
    StackUnderflow,
    BufferExhausted,
    PadAfterContent,
    /// The sequence ended without reducing to a single tree over every token.
    Unfinished { expected_len: usize, actual_len: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StackUnderflow => write!(f, "stack underflow: REDUCE with fewer than two items"),
            Violation::BufferExhausted => write!(f, "SHIFT with an empty buffer"),
            Violation::PadAfterContent => write!(f, "PAD after a non-padding transition"),
            Violation::Unfinished { expected_len, actual_len } => write!(
                f,
                "unfinished: {actual_len} non-padding transitions, T = 2N-1 requires {expected_len} ending in a single tree"
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InvalidAt {
    pub index: usize,
    pub reason: Violation,
}

impl From<InvalidAt> for SpinnError {
    fn from(v: InvalidAt) -> Self {
        SpinnError::Validity { index: v.index, reason: v.reason }
    }
}

/// Checks a sequence against `token_count` tokens. Leading PADs are allowed and
/// never take part in a reduction.
pub fn validate(seq: &[Transition], token_count: usize) -> std::result::Result<(), InvalidAt> {
    let mut depth = 0usize;
    let mut shifts = 0usize;
    let mut content = false;
    let mut real = 0usize;
    for (index, &a) in seq.iter().enumerate() {
        match a {
            Transition::Pad => {
                if content {
                    return Err(InvalidAt { index, reason: Violation::PadAfterContent });
                }
            }
            Transition::Shift => {
                content = true;
                real += 1;
                if shifts == token_count {
                    return Err(InvalidAt { index, reason: Violation::BufferExhausted });
                }
                shifts += 1;
                depth += 1;
            }
            Transition::Reduce => {
                content = true;
                real += 1;
                if depth < 2 {
                    return Err(InvalidAt { index, reason: Violation::StackUnderflow });
                }
                depth -= 1;
            }
        }
    }
    if depth != 1 || shifts != token_count {
        return Err(InvalidAt {
            index: seq.len(),
            reason: Violation::Unfinished {
                expected_len: (2 * token_count).saturating_sub(1),
                actual_len: real,
            },
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSequence {
    actions: Vec<Transition>,
    token_count: usize,
}

impl TransitionSequence {
    /// Wraps actions without checking them; see [`validate`].
    pub fn new(actions: Vec<Transition>, token_count: usize) -> Self {
        TransitionSequence { actions, token_count }
    }

    pub fn checked(actions: Vec<Transition>, token_count: usize) -> Result<Self> {
        validate(&actions, token_count)?;
        Ok(TransitionSequence { actions, token_count })
    }

    pub fn actions(&self) -> &[Transition] {
        &self.actions
    }

    pub fn into_actions(self) -> Vec<Transition> {
        self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn count(&self, kind: Transition) -> usize {
        self.actions.iter().filter(|&&a| a == kind).count()
    }

    pub fn validate(&self) -> std::result::Result<(), InvalidAt> {
        validate(&self.actions, self.token_count)
    }
}

impl fmt::Display for TransitionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_transitions(&self.actions))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BinaryTree {
    Leaf(String),
    Node(Box<BinaryTree>, Box<BinaryTree>),
}

impl BinaryTree {
    pub fn node(left: BinaryTree, right: BinaryTree) -> Self {
        BinaryTree::Node(Box::new(left), Box::new(right))
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BinaryTree::Leaf(_) => 1,
            BinaryTree::Node(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BinaryTree::Leaf(w) => out.push(w),
            BinaryTree::Node(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Post-order linearisation: a SHIFT per leaf, a REDUCE per internal node.
    pub fn transitions(&self) -> Vec<Transition> {
        let mut out = Vec::with_capacity(2 * self.leaf_count() - 1);
        self.collect_transitions(&mut out);
        out
    }

    fn collect_transitions(&self, out: &mut Vec<Transition>) {
        match self {
            BinaryTree::Leaf(_) => out.push(Transition::Shift),
            BinaryTree::Node(l, r) => {
                l.collect_transitions(out);
                r.collect_transitions(out);
                out.push(Transition::Reduce);
            }
        }
    }

    /// Renders in the space-separated binary parse format, e.g. `( ( the cat ) sat )`.
    pub fn render(&self) -> String {
        match self {
            BinaryTree::Leaf(w) => w.clone(),
            BinaryTree::Node(l, r) => format!("( {} {} )", l.render(), r.render()),
        }
    }
}

impl fmt::Display for BinaryTree {
    /// Compact form, e.g. `(Spot (sat down))`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinaryTree::Leaf(w) => f.write_str(w),
            BinaryTree::Node(l, r) => write!(f, "({l} {r})"),
        }
    }
}

/// Converts an unlabeled binary parse into its tokens and transition sequence:
/// each word is a SHIFT and each `)` a REDUCE.
pub fn parse_to_transitions(parse: &str) -> Result<(Vec<String>, TransitionSequence)> {
    // (children seen, position of the opening paren) per open bracket
    let mut frames: Vec<(usize, usize)> = Vec::new();
    let mut top_level = 0usize;
    let mut tokens = Vec::new();
    let mut actions = Vec::new();

    let push_child = |frames: &mut Vec<(usize, usize)>, top_level: &mut usize| match frames.last_mut() {
        Some(f) => f.0 += 1,
        None => *top_level += 1,
    };

    for (pos, piece) in lex(parse) {
        match piece {
            "(" => frames.push((0, pos)),
            ")" => {
                let (children, open) = frames.pop().ok_or_else(|| SpinnError::Parse {
                    position: pos,
                    message: "unbalanced ')'".into(),
                })?;
                if children != 2 {
                    return Err(SpinnError::Parse {
                        position: open,
                        message: format!("non-binary node with {children} children"),
                    });
                }
                actions.push(Transition::Reduce);
                push_child(&mut frames, &mut top_level);
            }
            word => {
                tokens.push(word.to_string());
                actions.push(Transition::Shift);
                push_child(&mut frames, &mut top_level);
            }
        }
        if top_level > 1 {
            return Err(SpinnError::Parse {
                position: pos,
                message: "more than one tree at top level".into(),
            });
        }
    }
    if let Some(&(_, open)) = frames.last() {
        return Err(SpinnError::Parse { position: open, message: "unbalanced '(' never closed".into() });
    }
    if tokens.is_empty() {
        return Err(SpinnError::Parse { position: 0, message: "empty parse".into() });
    }
    let n = tokens.len();
    Ok((tokens, TransitionSequence::new(actions, n)))
}

/// Splits a parse string into parentheses and words with their byte offsets.
fn lex(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in s.char_indices() {
        if ch.is_whitespace() || ch == '(' || ch == ')' {
            if let Some(st) = start.take() {
                out.push((st, &s[st..i]));
            }
            if ch == '(' || ch == ')' {
                out.push((i, &s[i..i + 1]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(st) = start {
        out.push((st, &s[st..]));
    }
    out
}

/// Rebuilds the tree a valid sequence describes over `tokens`. Leading PADs are skipped.
pub fn transitions_to_tree(tokens: &[String], seq: &[Transition]) -> Result<BinaryTree> {
    validate(seq, tokens.len())?;
    let mut stack: Vec<BinaryTree> = Vec::new();
    let mut next = 0;
    for a in seq {
        match a {
            Transition::Pad => {}
            Transition::Shift => {
                stack.push(BinaryTree::Leaf(tokens[next].clone()));
                next += 1;
            }
            Transition::Reduce => {
                let right = stack.pop().expect("validated");
                let left = stack.pop().expect("validated");
                stack.push(BinaryTree::node(left, right));
            }
        }
    }
    Ok(stack.pop().expect("validated"))
}

/// Fixed-length tokens and transitions for batching.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedSentence {
    /// Exactly `n` slots; real tokens first, then [`PAD_TOKEN`]s.
    pub tokens: Vec<String>,
    /// Exactly `2n - 1` transitions.
    pub transitions: Vec<Transition>,
    /// Number of real (non-padding) token slots.
    pub real_tokens: usize,
}

/// Crops transitions at the left or pads them at the left to `2n - 1`.
///
/// Cropping drops the tokens the removed SHIFTs would have consumed. Left padding is
/// expressed as [`Transition::Pad`], which pushes an empty token without taking a
/// buffer slot, so the token list only needs right padding to reach `n`.
pub fn pad_and_crop(tokens: &[String], seq: &[Transition], n: usize) -> Result<PaddedSentence> {
    if n < 1 {
        return Err(SpinnError::Config("target length N must be at least 1".into()));
    }
    let target = 2 * n - 1;
    let (mut kept_tokens, transitions) = if seq.len() > target {
        let cut = seq.len() - target;
        let removed_shifts = seq[..cut].iter().filter(|&&a| a == Transition::Shift).count();
        (tokens[removed_shifts.min(tokens.len())..].to_vec(), seq[cut..].to_vec())
    } else {
        let mut padded = vec![Transition::Pad; target - seq.len()];
        padded.extend_from_slice(seq);
        (tokens.to_vec(), padded)
    };
    if kept_tokens.len() > n {
        return Err(SpinnError::Internal(format!(
            "{} tokens survive cropping to N = {n}; input sequence was not valid",
            kept_tokens.len()
        )));
    }
    let real_tokens = kept_tokens.len();
    kept_tokens.resize(n, PAD_TOKEN.to_string());
    Ok(PaddedSentence { tokens: kept_tokens, transitions, real_tokens })
}

/// Random binary tree over `leaves` words named `w0`, `w1`, …, with split points
/// drawn uniformly at every node.
pub fn random_tree(leaves: usize, rng: &mut RngState) -> BinaryTree {
    let mut counter = 0;
    random_subtree(leaves.max(1), rng, &mut counter)
}

fn random_subtree(leaves: usize, rng: &mut RngState, counter: &mut usize) -> BinaryTree {
    if leaves == 1 {
        let w = format!("w{counter}");
        *counter += 1;
        return BinaryTree::Leaf(w);
    }
    let left = 1 + rng.below(leaves - 1);
    let l = random_subtree(left, rng, counter);
    let r = random_subtree(leaves - left, rng, counter);
    BinaryTree::node(l, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Transition::{Pad as P, Reduce as R, Shift as S};

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn linearises_the_cat_sat_down() {
        let (tokens, seq) = parse_to_transitions("( ( the cat ) ( sat down ) )").unwrap();
        assert_eq!(tokens, words("the cat sat down"));
        assert_eq!(seq.actions(), &[S, S, R, S, S, R, R]);
        assert!(seq.validate().is_ok());
    }

    #[test]
    fn single_leaf_and_left_branching() {
        let (tokens, seq) = parse_to_transitions("cat").unwrap();
        assert_eq!(tokens, words("cat"));
        assert_eq!(seq.actions(), &[S]);
        let (tokens, seq) = parse_to_transitions("( ( a b ) c )").unwrap();
        assert_eq!(seq.actions(), &[S, S, R, S, R]);
        let tree = transitions_to_tree(&tokens, seq.actions()).unwrap();
        assert_eq!(parse_to_transitions(&tree.render()).unwrap(), (tokens, seq));
    }

    #[test]
    fn rejects_malformed_parses() {
        for bad in ["( a b c )", "( a b ) )", "( ( a b )", "", "( a )", "a b"] {
            match parse_to_transitions(bad) {
                Err(SpinnError::Parse { .. }) => {}
                other => panic!("{bad:?} gave {other:?}"),
            }
        }
        match parse_to_transitions("( x ( a b c ) )") {
            Err(SpinnError::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spot_sat_down_tree() {
        let tree = transitions_to_tree(&words("Spot sat down"), &[S, S, S, R, R]).unwrap();
        assert_eq!(tree.to_string(), "(Spot (sat down))");
        assert_eq!(transitions_to_tree(&words("a"), &[S]).unwrap(), BinaryTree::Leaf("a".into()));
    }

    #[test]
    fn invalid_sequence_names_first_offending_index() {
        match transitions_to_tree(&words("a b"), &[S, R, S]) {
            Err(SpinnError::Validity { index: 1, reason: Violation::StackUnderflow }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validate_diagnoses() {
        assert!(validate(&[S, S, R], 2).is_ok());
        assert_eq!(validate(&[R, S], 1).unwrap_err(), InvalidAt { index: 0, reason: Violation::StackUnderflow });
        let err = validate(&[S, S, S, R], 3).unwrap_err();
        assert_eq!(err.index, 4);
        assert!(matches!(err.reason, Violation::Unfinished { expected_len: 5, actual_len: 4 }));
        assert_eq!(validate(&[S, S, S], 2).unwrap_err().reason, Violation::BufferExhausted);
        assert_eq!(validate(&[P, S, P], 1).unwrap_err().reason, Violation::PadAfterContent);
        assert!(validate(&[P, P, S], 1).is_ok());
        assert!(validate(&[], 0).is_err());
    }

    #[test]
    fn pads_short_sentence_to_fixed_length() {
        let (tokens, seq) = parse_to_transitions("( ( the cat ) ( sat down ) )").unwrap();
        let p = pad_and_crop(&tokens, seq.actions(), 25).unwrap();
        assert_eq!(p.transitions.len(), 49);
        assert_eq!(p.transitions.iter().take_while(|&&a| a == P).count(), 42);
        assert_eq!(&p.transitions[42..], seq.actions());
        assert_eq!(p.tokens.len(), 25);
        assert_eq!(&p.tokens[..4], &tokens[..]);
        assert!(p.tokens[4..].iter().all(|t| t == PAD_TOKEN));
        assert_eq!(p.real_tokens, 4);
    }

    #[test]
    fn exact_length_is_unchanged() {
        let (tokens, seq) = parse_to_transitions("( a ( b c ) )").unwrap();
        let p = pad_and_crop(&tokens, seq.actions(), 3).unwrap();
        assert_eq!(p.transitions, seq.actions());
        assert_eq!(p.tokens, tokens);
        assert!(pad_and_crop(&tokens, seq.actions(), 0).is_err());
    }

    #[test]
    fn crops_long_sentence_at_the_left() {
        let mut rng = RngState::new(30);
        let tree = random_tree(30, &mut rng);
        let seq = tree.transitions();
        let tokens: Vec<String> = tree.leaves().iter().map(|s| s.to_string()).collect();
        let p = pad_and_crop(&tokens, &seq, 25).unwrap();
        assert_eq!(p.transitions.len(), 49);
        assert_eq!(&p.transitions[..], &seq[10..]);
        let removed_shifts = seq[..10].iter().filter(|&&a| a == S).count();
        let kept_shifts = p.transitions.iter().filter(|&&a| a == S).count();
        assert_eq!(kept_shifts, 30 - removed_shifts);
        assert_eq!(p.real_tokens, kept_shifts);
        assert_eq!(&p.tokens[..kept_shifts], &tokens[removed_shifts..]);
    }

    #[test]
    fn transition_text_round_trip() {
        assert_eq!(parse_transitions("S S R").unwrap(), vec![S, S, R]);
        assert_eq!(parse_transitions("SSR").unwrap(), vec![S, S, R]);
        assert_eq!(parse_transitions("shift,shift,reduce").unwrap(), vec![S, S, R]);
        assert!(parse_transitions("S X").is_err());
        assert_eq!(format_transitions(&[S, R, P]), "S R P");
    }
}
