mod common;

use spinn::encoder::{RunMode, SentenceInput, TransitionMode, Variant};
use spinn::oracles::{recursive_treelstm, TreeLstmParams};
use spinn::tensor::{Float, RngState};
use spinn::transitions::Transition;

#[test]
fn pi_nt_equals_recursive_treelstm_on_random_trees() {
    let (d, wd, vocab) = (32, 12, 40);
    let (mut enc, store) = common::encoder(Variant::PiNt, d, wd, 25, 21);
    let emb = common::table(vocab, wd, 22);
    let params = TreeLstmParams::from_encoder(&enc, &store).unwrap();
    let mut rng = RngState::new(23);
    let mut worst: Float = 0.0;
    for _batch in 0..10 {
        let sentences: Vec<_> = (0..50).map(|_| common::random_sentence(&mut rng, 25, vocab)).collect();
        let seqs: Vec<Vec<Transition>> = sentences
            .iter()
            .map(|(t, ids)| {
                let mut s = vec![Transition::Pad; 2 * (25 - ids.len())];
                s.extend(t.transitions());
                s
            })
            .collect();
        let inputs: Vec<SentenceInput> = sentences
            .iter()
            .zip(&seqs)
            .map(|((_, ids), s)| SentenceInput { tokens: ids, transitions: Some(s) })
            .collect();
        let out = enc.forward(&store, &emb, &inputs, RunMode::inference(TransitionMode::Given), &mut rng).unwrap();
        for (b, (tree, ids)) in sentences.iter().enumerate() {
            let word = |tok: &str| emb.row(ids[tok[1..].parse::<usize>().unwrap()]).to_vec();
            let expect = recursive_treelstm(tree, &word, &params);
            worst = worst.max(common::max_abs_diff(out.h.row(b), &expect.h));
            assert_eq!(out.top(b).h, out.h.row(b));
        }
    }
    assert!(worst <= 1e-10, "max |dh| {worst:e}");
}

#[test]
fn left_padding_leaves_pi_nt_encoding_unchanged() {
    let (mut enc, store) = common::encoder(Variant::PiNt, 8, 6, 25, 31);
    let emb = common::table(20, 6, 32);
    let mut rng = RngState::new(33);
    for _ in 0..100 {
        let (tree, ids) = common::random_sentence(&mut rng, 12, 20);
        let bare = tree.transitions();
        let mut padded = vec![Transition::Pad; 1 + rng.below(20)];
        padded.extend_from_slice(&bare);
        let mode = RunMode::inference(TransitionMode::Given);
        let a = enc.forward(&store, &emb, &[SentenceInput { tokens: &ids, transitions: Some(&bare) }], mode, &mut rng);
        let b = enc.forward(&store, &emb, &[SentenceInput { tokens: &ids, transitions: Some(&padded) }], mode, &mut rng);
        assert_eq!(a.unwrap().h, b.unwrap().h);
    }
}
