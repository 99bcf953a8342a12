mod common;

use spinn::encoder::{RunMode, SentenceInput, TransitionMode, Variant};
use spinn::tensor::{Float, RngState};
use spinn::transitions::Transition;

fn check(variant: Variant, mode: TransitionMode, batches: usize) {
    let (n, vocab) = (20, 50);
    let (mut enc, store) = common::encoder(variant, 12, 7, n, 41);
    let emb = common::table(vocab, 7, 42);
    let run = RunMode::inference(mode);
    let mut rng = RngState::new(43);
    let mut worst: Float = 0.0;
    for _ in 0..batches {
        let sentences: Vec<_> = (0..32).map(|_| common::random_sentence(&mut rng, n, vocab)).collect();
        let seqs: Vec<Vec<Transition>> = sentences
            .iter()
            .map(|(t, ids)| {
                let mut s = vec![Transition::Pad; 2 * n - 1 - (2 * ids.len() - 1)];
                s.extend(t.transitions());
                s
            })
            .collect();
        let inputs: Vec<SentenceInput> = sentences
            .iter()
            .zip(&seqs)
            .map(|((_, ids), s)| SentenceInput { tokens: ids, transitions: Some(s) })
            .collect();
        let batch = enc.forward(&store, &emb, &inputs, run, &mut rng).unwrap();
        for (b, inp) in inputs.iter().enumerate() {
            let single = enc.forward(&store, &emb, std::slice::from_ref(inp), run, &mut rng).unwrap();
            worst = worst.max(common::max_abs_diff(batch.h.row(b), single.h.row(0)));
            assert_eq!(batch.actions(b), single.actions(0));
        }
    }
    assert!(worst <= 1e-12, "{variant} {mode}: max |diff| {worst:e}");
}

#[test]
fn batch_equals_per_example_pi_nt() {
    check(Variant::PiNt, TransitionMode::Given, 50);
}

#[test]
fn batch_equals_per_example_pi() {
    check(Variant::Pi, TransitionMode::Given, 10);
}

#[test]
fn batch_equals_per_example_full_predicted() {
    check(Variant::Full, TransitionMode::Predicted, 10);
}

#[test]
fn copies_of_one_sentence_give_identical_rows() {
    let (mut enc, store) = common::encoder(Variant::Pi, 10, 6, 15, 51);
    let emb = common::table(30, 6, 52);
    let mut rng = RngState::new(53);
    let (tree, ids) = common::random_sentence(&mut rng, 15, 30);
    let seq = tree.transitions();
    let inputs = vec![SentenceInput { tokens: &ids, transitions: Some(&seq) }; 17];
    let out = enc.forward(&store, &emb, &inputs, RunMode::inference(TransitionMode::Given), &mut rng).unwrap();
    for b in 1..17 {
        assert_eq!(out.h.row(b), out.h.row(0));
    }
}
