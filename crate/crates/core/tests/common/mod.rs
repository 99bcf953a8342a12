#![allow(dead_code)]

use spinn::encoder::{Encoder, EncoderConfig, Variant};
use spinn::tensor::{ops, Float, Matrix, ParamStore, RngState};
use spinn::transitions::{random_tree, BinaryTree};

pub fn encoder(variant: Variant, dim: usize, word_dim: usize, max_len: usize, seed: u64) -> (Encoder, ParamStore) {
    let mut cfg = EncoderConfig::for_variant(variant);
    cfg.dim = dim;
    cfg.word_dim = word_dim;
    cfg.tracker_dim = 5;
    cfg.max_len = max_len;
    let mut rng = RngState::new(seed);
    let mut store = ParamStore::new();
    let mut enc = Encoder::create(cfg, &mut store, &mut rng).unwrap();
    // Move everything off its initial values so nothing is trivially symmetric.
    for e in store.entries_mut() {
        for v in e.value.data_mut() {
            *v += rng.uniform(-0.3, 0.3) as Float;
        }
    }
    for (m, v) in enc.proj_bn.stats.mean.iter_mut().zip(enc.proj_bn.stats.var.iter_mut()) {
        *m = rng.uniform(-0.2, 0.2) as Float;
        *v = rng.uniform(0.5, 1.5) as Float;
    }
    (enc, store)
}

pub fn table(vocab: usize, word_dim: usize, seed: u64) -> Matrix {
    ops::uniform_init(vocab, word_dim, -1.0, 1.0, &mut RngState::new(seed)).unwrap()
}

/// Random tree whose leaves are token ids rendered as strings.
pub fn random_sentence(rng: &mut RngState, max_leaves: usize, vocab: usize) -> (BinaryTree, Vec<usize>) {
    let n = 1 + rng.below(max_leaves);
    let tree = random_tree(n, rng);
    let ids = (0..n).map(|_| rng.below(vocab)).collect();
    (tree, ids)
}

pub fn max_abs_diff(a: &[Float], b: &[Float]) -> Float {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, Float::max)
}
