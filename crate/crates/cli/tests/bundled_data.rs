use std::path::Path;

use spinn::data::snli_line;
use spinn_cli::{load_split, synthetic_splits, SyntheticCorpus};

fn expected(pairs: &[spinn::data::ExamplePair]) -> String {
    pairs.iter().map(|p| snli_line(p).unwrap() + "\n").collect()
}

#[test]
fn bundled_corpora_match_the_generator() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for (name, corpus) in [("toy", SyntheticCorpus::Toy), ("grammar", SyntheticCorpus::Grammar)] {
        let (train, dev) = synthetic_splits(corpus, 1);
        for (split, pairs) in [("train", &train), ("dev", &dev)] {
            let path = root.join(name).join(format!("{split}.jsonl"));
            let on_disk = std::fs::read_to_string(&path).unwrap();
            assert!(on_disk == expected(pairs), "{} is stale; rerun `spinn prep --synthetic {name}`", path.display());
            assert_eq!(load_split(&root.join(name), split).unwrap().len(), pairs.len());
        }
    }
}

#[test]
fn grammar_corpus_has_two_thousand_sentences() {
    let (train, dev) = synthetic_splits(SyntheticCorpus::Grammar, 1);
    assert_eq!(2 * (train.len() + dev.len()), 2000);
    assert_eq!(dev.len(), 200);
}
