use spinn::checkpoint::Checkpoint;
use spinn::config::RunConfig;
use spinn::data::{prepare_all, synthetic, EmbeddingTable, PreparedPair};
use spinn::encoder::Variant;
use spinn::tensor::Matrix;
use spinn::trainer::Trainer;

fn setup(variant: Variant) -> (RunConfig, EmbeddingTable, Vec<PreparedPair>) {
    let mut cfg = RunConfig::for_variant(variant);
    for (k, v) in [("dim", "8"), ("word_dim", "6"), ("tracker_dim", "4"), ("mlp_hidden", "16"), ("seq_len", "12"), ("batch_size", "8"), ("seed", "5")] {
        cfg.set(k, v).unwrap();
    }
    let pairs = synthetic::toy_pairs(40, 5);
    let table = EmbeddingTable::synthetic(synthetic::vocabulary(), cfg.word_dim, 5).unwrap();
    let prepared = prepare_all(&pairs, cfg.seq_len, &table).unwrap();
    (cfg, table, prepared)
}

fn bytes(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    ck.write_to(&mut out).unwrap();
    out
}

fn train(t: &mut Trainer, emb: &Matrix, data: &[PreparedPair], steps: usize) {
    for _ in 0..steps {
        t.train_step(emb, data).unwrap();
    }
}

#[test]
fn identical_runs_give_identical_checkpoints() {
    for variant in Variant::ALL {
        let (cfg, table, data) = setup(variant);
        let mut a = Trainer::new(cfg.clone()).unwrap();
        let mut b = Trainer::new(cfg).unwrap();
        train(&mut a, table.matrix(), &data, 12);
        train(&mut b, table.matrix(), &data, 12);
        assert_eq!(bytes(&a.checkpoint()), bytes(&b.checkpoint()), "{variant}");
    }
}

#[test]
fn resume_from_saved_checkpoint_equals_uninterrupted_training() {
    let dir = std::env::temp_dir().join(format!("spinn-resume-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for variant in Variant::ALL {
        let (cfg, table, data) = setup(variant);
        let mut straight = Trainer::new(cfg.clone()).unwrap();
        // 7 steps cross an epoch boundary (5 batches per epoch).
        train(&mut straight, table.matrix(), &data, 14);

        let mut first = Trainer::new(cfg).unwrap();
        train(&mut first, table.matrix(), &data, 7);
        let path = dir.join(format!("{variant}.ckpt"));
        first.checkpoint().save(&path).unwrap();
        let mut resumed = Trainer::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        train(&mut resumed, table.matrix(), &data, 7);
        assert_eq!(bytes(&resumed.checkpoint()), bytes(&straight.checkpoint()), "{variant}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn different_seeds_differ() {
    let (cfg, table, data) = setup(Variant::Pi);
    let mut other = cfg.clone();
    other.set("seed", "6").unwrap();
    let mut a = Trainer::new(cfg).unwrap();
    let mut b = Trainer::new(other).unwrap();
    train(&mut a, table.matrix(), &data, 3);
    train(&mut b, table.matrix(), &data, 3);
    assert_ne!(bytes(&a.checkpoint()), bytes(&b.checkpoint()));
}
