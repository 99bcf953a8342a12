//! Generated corpora: template NLI pairs for overfitting runs and a deterministic
//! bracketing grammar for transition learning.

use super::{ExamplePair, Label};
use crate::tensor::RngState;
use crate::transitions::BinaryTree;

const DETS: &[&str] = &["the", "a", "every", "some"];
const ADJS: &[&str] = &["small", "old", "happy", "red", "tall", "quiet", "young", "wet"];
const NOUNS: &[&str] = &[
    "dog", "cat", "man", "woman", "child", "horse", "bird", "boy", "girl", "farmer", "chef", "ball", "car",
    "boat", "tree", "house",
];
const VERBS: &[&str] = &["sees", "chases", "holds", "pushes", "paints", "follows", "watches", "carries"];
/// Contradicting replacement for each entry of `VERBS`.
const OPPOSITES: &[&str] = &["ignores", "flees", "drops", "pulls", "erases", "leads", "avoids", "abandons"];
const INTRANSITIVE: &[&str] = &["sleeps", "runs", "sits", "waits", "swims", "laughs"];
const PREPS: &[&str] = &["near", "under", "behind", "beside", "inside"];

fn pick<'a>(rng: &mut RngState, words: &[&'a str]) -> &'a str {
    words[rng.below(words.len())]
}

fn leaf(w: &str) -> BinaryTree {
    BinaryTree::Leaf(w.to_string())
}

fn np(det: &str, adj: Option<&str>, noun: &str) -> BinaryTree {
    match adj {
        Some(a) => BinaryTree::node(leaf(det), BinaryTree::node(leaf(a), leaf(noun))),
        None => BinaryTree::node(leaf(det), leaf(noun)),
    }
}

fn pair_from_trees(premise: &BinaryTree, hypothesis: &BinaryTree, label: Label) -> ExamplePair {
    let tokens = |t: &BinaryTree| t.leaves().into_iter().map(str::to_string).collect();
    ExamplePair {
        premise_tokens: tokens(premise),
        premise_transitions: premise.transitions(),
        hypothesis_tokens: tokens(hypothesis),
        hypothesis_transitions: hypothesis.transitions(),
        label,
    }
}

/// Template pairs with balanced labels. The premise is
/// `((det (adj noun)) (verb (det noun)))`, sometimes with a trailing prepositional
/// phrase. Entailment drops the modifiers, contradiction swaps the verb for its
/// opposite, neutral adds a prepositional phrase the premise never mentions.
pub fn toy_pairs(count: usize, seed: u64) -> Vec<ExamplePair> {
    let mut rng = RngState::derived(seed, 0x7079);
    (0..count)
        .map(|i| {
            let label = Label::ALL[i % 3];
            let (d1, adj, n1) = (pick(&mut rng, DETS), pick(&mut rng, ADJS), pick(&mut rng, NOUNS));
            let verb_idx = rng.below(VERBS.len());
            let (d2, n2) = (pick(&mut rng, DETS), pick(&mut rng, NOUNS));
            let (prep, d3, n3) = (pick(&mut rng, PREPS), pick(&mut rng, DETS), pick(&mut rng, NOUNS));
            let with_pp = label != Label::Neutral && rng.below(2) == 1;

            let object = np(d2, None, n2);
            let pp = BinaryTree::node(leaf(prep), np(d3, None, n3));
            let mut vp = BinaryTree::node(leaf(VERBS[verb_idx]), object.clone());
            if with_pp {
                vp = BinaryTree::node(vp, pp.clone());
            }
            let premise = BinaryTree::node(np(d1, Some(adj), n1), vp);

            let subject = np(d1, None, n1);
            let hyp_vp = match label {
                Label::Entailment => BinaryTree::node(leaf(VERBS[verb_idx]), object),
                Label::Contradiction => BinaryTree::node(leaf(OPPOSITES[verb_idx]), object),
                Label::Neutral => BinaryTree::node(BinaryTree::node(leaf(VERBS[verb_idx]), object), pp),
            };
            let hypothesis = BinaryTree::node(subject, hyp_vp);
            pair_from_trees(&premise, &hypothesis, label)
        })
        .collect()
}

/// One sentence of the grammar
/// `S → (NP VP)`, `NP → (det noun) | (det (adj noun))`,
/// `VP → intransitive | (verb NP) | (intransitive (prep NP))`.
/// Word categories are disjoint, so the bracketing of any sentence is fully
/// determined by its words.
pub fn grammar_sentence(rng: &mut RngState) -> BinaryTree {
    let noun_phrase = |rng: &mut RngState| {
        let det = pick(rng, DETS);
        let adj = (rng.below(2) == 1).then(|| pick(rng, ADJS));
        np(det, adj, pick(rng, NOUNS))
    };
    let subject = noun_phrase(rng);
    let vp = match rng.below(3) {
        0 => leaf(pick(rng, INTRANSITIVE)),
        1 => {
            let v = pick(rng, VERBS);
            BinaryTree::node(leaf(v), noun_phrase(rng))
        }
        _ => {
            let v = pick(rng, INTRANSITIVE);
            let p = pick(rng, PREPS);
            BinaryTree::node(leaf(v), BinaryTree::node(leaf(p), noun_phrase(rng)))
        }
    };
    BinaryTree::node(subject, vp)
}

/// `count` grammar sentences paired two at a time. The label is a fixed function of
/// the pair: same verb means entailment, same subject noun contradiction,
/// otherwise neutral.
pub fn grammar_pairs(count: usize, seed: u64) -> Vec<ExamplePair> {
    let mut rng = RngState::derived(seed, 0x6772);
    (0..count)
        .map(|_| {
            let p = grammar_sentence(&mut rng);
            let h = grammar_sentence(&mut rng);
            let (pl, hl) = (p.leaves(), h.leaves());
            let verb = |ls: &[&str]| ls.iter().position(|w| VERBS.contains(w) || INTRANSITIVE.contains(w));
            let label = match (verb(&pl), verb(&hl)) {
                (Some(a), Some(b)) if pl[a] == hl[b] => Label::Entailment,
                _ if pl[..2].last() == hl[..2].last() => Label::Contradiction,
                _ => Label::Neutral,
            };
            pair_from_trees(&p, &h, label)
        })
        .collect()
}

/// Splits off the last `fraction` of `pairs` as a held-out set.
pub fn split_held_out(mut pairs: Vec<ExamplePair>, fraction: f64) -> (Vec<ExamplePair>, Vec<ExamplePair>) {
    let held = ((pairs.len() as f64) * fraction).round() as usize;
    let rest = pairs.split_off(pairs.len() - held.min(pairs.len()));
    (pairs, rest)
}

/// Every word the generators can emit.
pub fn vocabulary() -> Vec<&'static str> {
    [DETS, ADJS, NOUNS, VERBS, OPPOSITES, INTRANSITIVE, PREPS].concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transitions::{parse_to_transitions, validate};

    #[test]
    fn toy_pairs_are_valid_balanced_and_deterministic() {
        let pairs = toy_pairs(300, 5);
        assert_eq!(pairs, toy_pairs(300, 5));
        for l in Label::ALL {
            assert_eq!(pairs.iter().filter(|p| p.label == l).count(), 100);
        }
        for p in &pairs {
            validate(&p.premise_transitions, p.premise_tokens.len()).unwrap();
            validate(&p.hypothesis_transitions, p.hypothesis_tokens.len()).unwrap();
        }
    }

    #[test]
    fn grammar_bracketing_is_a_function_of_the_words() {
        let mut rng = RngState::new(3);
        let mut seen = std::collections::HashMap::new();
        for _ in 0..2000 {
            let t = grammar_sentence(&mut rng);
            let cats: Vec<usize> = t
                .leaves()
                .iter()
                .map(|w| [DETS, ADJS, NOUNS, VERBS, INTRANSITIVE, PREPS].iter().position(|c| c.contains(w)).unwrap())
                .collect();
            let prev = seen.insert(cats, t.transitions());
            assert!(prev.is_none_or(|p| p == t.transitions()));
            let (toks, seq) = parse_to_transitions(&t.render()).unwrap();
            assert_eq!(seq.actions(), t.transitions().as_slice());
            assert_eq!(toks.len(), t.leaf_count());
        }
    }

    #[test]
    fn held_out_split() {
        let (a, b) = split_held_out(grammar_pairs(1000, 1), 0.2);
        assert_eq!((a.len(), b.len()), (800, 200));
    }
}
