//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use spinn::bench::{BenchConfig, BenchModel};
use spinn::config::RunConfig;
use spinn::data::prepare_all;
use spinn::encoder::{Encoder, EncoderConfig, RunMode, SentenceInput, StatePair, TransitionMode, Variant};
use spinn::oracles::{naive_stack_run, recursive_treelstm, TreeLstmParams};
use spinn::tensor::{ops, Float, Matrix, ParamStore, RngState};
use spinn::thin_stack::run_sequence;
use spinn::trainer::Trainer;
use spinn::transitions::{parse_to_transitions, random_tree, transitions_to_tree, validate, BinaryTree, Transition};
use spinn_cli::{build_embeddings, cmd_bench, cmd_gradcheck, cmd_trace, load_split, trace_run};

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn encoder(variant: Variant, dim: usize, word_dim: usize, max_len: usize, seed: u64) -> (Encoder, ParamStore) {
    let mut cfg = EncoderConfig::for_variant(variant);
    cfg.dim = dim;
    cfg.word_dim = word_dim;
    cfg.tracker_dim = 5;
    cfg.max_len = max_len;
    let mut rng = RngState::new(seed);
    let mut store = ParamStore::new();
    let mut enc = Encoder::create(cfg, &mut store, &mut rng).unwrap();
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

fn table(vocab: usize, word_dim: usize, seed: u64) -> Matrix {
    ops::uniform_init(vocab, word_dim, -1.0, 1.0, &mut RngState::new(seed)).unwrap()
}

fn max_abs_diff(a: &[Float], b: &[Float]) -> Float {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, Float::max)
}

fn random_sentence(rng: &mut RngState, max_leaves: usize, vocab: usize) -> (BinaryTree, Vec<usize>) {
    let n = 1 + rng.below(max_leaves);
    let tree = random_tree(n, rng);
    (tree, (0..n).map(|_| rng.below(vocab)).collect())
}

fn left_pad(seq: Vec<Transition>, len: usize) -> Vec<Transition> {
    let mut s = vec![Transition::Pad; len - seq.len()];
    s.extend(seq);
    s
}

fn thin_stack_vs_naive() -> Outcome {
    let d = 16;
    let (enc, store) = encoder(Variant::PiNt, d, 8, 25, 11);
    let compose = |l: &StatePair, r: &StatePair| enc.compose(&store, l, r, &[]).unwrap();
    let mut rng = RngState::new(12);
    let mut worst: Float = 0.0;
    for _ in 0..1000 {
        let n = 1 + rng.below(25);
        let seq = random_tree(n, &mut rng).transitions();
        let pairs: Vec<StatePair> = (0..n)
            .map(|_| StatePair {
                h: (0..d).map(|_| rng.uniform(-1.0, 1.0) as Float).collect(),
                c: (0..d).map(|_| rng.uniform(-1.0, 1.0) as Float).collect(),
            })
            .collect();
        let flat: Vec<Float> = pairs.iter().flat_map(|p| p.to_row()).collect();
        let run = run_sequence(&flat, 2 * d, &seq, |l, r, out| {
            out.copy_from_slice(&compose(&StatePair::from_row(l), &StatePair::from_row(r)).to_row());
        })
        .map_err(|e| e.to_string())?;
        let naive = naive_stack_run(&pairs, &seq, compose).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(run.output(), &naive.to_row()));
    }
    check(worst <= 1e-12, format!("1000 sequences, D=16, max |diff| {worst:.2e}"))
}

fn treelstm_equivalence() -> Outcome {
    let (d, wd, vocab, n) = (32, 12, 40, 25);
    let (mut enc, store) = encoder(Variant::PiNt, d, wd, n, 21);
    let emb = table(vocab, wd, 22);
    let params = TreeLstmParams::from_encoder(&enc, &store).map_err(|e| e.to_string())?;
    let mut rng = RngState::new(23);
    let mut worst: Float = 0.0;
    for _ in 0..10 {
        let sentences: Vec<_> = (0..50).map(|_| random_sentence(&mut rng, n, vocab)).collect();
        let seqs: Vec<Vec<Transition>> = sentences.iter().map(|(t, _)| left_pad(t.transitions(), 2 * n - 1)).collect();
        let inputs: Vec<SentenceInput> = sentences
            .iter()
            .zip(&seqs)
            .map(|((_, ids), s)| SentenceInput { tokens: ids, transitions: Some(s) })
            .collect();
        let out = enc
            .forward(&store, &emb, &inputs, RunMode::inference(TransitionMode::Given), &mut rng)
            .map_err(|e| e.to_string())?;
        for (b, (tree, ids)) in sentences.iter().enumerate() {
            let word = |tok: &str| emb.row(ids[tok[1..].parse::<usize>().unwrap()]).to_vec();
            worst = worst.max(max_abs_diff(out.h.row(b), &recursive_treelstm(tree, &word, &params).h));
        }
    }
    check(worst <= 1e-10, format!("500 trees, D=32, max |dh| {worst:.2e}"))
}

fn gradients() -> Outcome {
    let reports = cmd_gradcheck("all", 1).map_err(|e| e.to_string())?;
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {:.1e} over {}", r.variant, r.max_relative_error(), r.coordinates()))
        .collect();
    check(reports.len() == 3 && reports.iter().all(|r| r.passed()), summary.join(", "))
}

fn batch_identity() -> Outcome {
    let (n, vocab) = (20, 50);
    let mut worst: Float = 0.0;
    let mut rng = RngState::new(43);
    for (k, (variant, mode)) in [
        (Variant::PiNt, TransitionMode::Given),
        (Variant::Pi, TransitionMode::Given),
        (Variant::Full, TransitionMode::Predicted),
    ]
    .into_iter()
    .enumerate()
    {
        let (mut enc, store) = encoder(variant, 12, 7, n, 41 + k as u64);
        let emb = table(vocab, 7, 42);
        let run = RunMode::inference(mode);
        let batches = if variant == Variant::PiNt { 50 } else { 10 };
        for _ in 0..batches {
            let sentences: Vec<_> = (0..32).map(|_| random_sentence(&mut rng, n, vocab)).collect();
            let seqs: Vec<Vec<Transition>> =
                sentences.iter().map(|(t, _)| left_pad(t.transitions(), 2 * n - 1)).collect();
            let inputs: Vec<SentenceInput> = sentences
                .iter()
                .zip(&seqs)
                .map(|((_, ids), s)| SentenceInput { tokens: ids, transitions: Some(s) })
                .collect();
            let batch = enc.forward(&store, &emb, &inputs, run, &mut rng).map_err(|e| e.to_string())?;
            for (b, inp) in inputs.iter().enumerate() {
                let single = enc.forward(&store, &emb, std::slice::from_ref(inp), run, &mut rng).map_err(|e| e.to_string())?;
                worst = worst.max(max_abs_diff(batch.h.row(b), single.h.row(0)));
            }
        }
    }
    check(worst <= 1e-12, format!("50 PI-NT + 10 PI + 10 FULL batches of 32, max |diff| {worst:.2e}"))
}

fn counting_laws() -> Outcome {
    let mut rng = RngState::new(61);
    for i in 0..10_000 {
        let n = 1 + rng.below(40);
        let tree = random_tree(n, &mut rng);
        let seq = tree.transitions();
        let shifts = seq.iter().filter(|&&a| a == Transition::Shift).count();
        if seq.len() != 2 * n - 1 || shifts != n || validate(&seq, n).is_err() {
            return Err(format!("tree {i}: {} transitions for {n} leaves", seq.len()));
        }
        let (tokens, parsed) = parse_to_transitions(&tree.render()).map_err(|e| e.to_string())?;
        if parsed.actions() != &seq[..] || transitions_to_tree(&tokens, &seq).map_err(|e| e.to_string())? != tree {
            return Err(format!("tree {i}: round trip differs"));
        }
    }
    Ok("10000 trees, T = 2N-1 and parse round trip hold".into())
}

fn golden_trace() -> Outcome {
    let expected = vec![vec![1], vec![1, 2], vec![1, 2, 3], vec![1, 4], vec![5]];
    let text = cmd_trace("Spot sat down", Some("S S S R R")).map_err(|e| e.to_string())?;
    let printed: Vec<Vec<usize>> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut q: Vec<usize> = l.split_whitespace().rev().map_while(|t| t.parse().ok()).collect();
            q.reverse();
            q
        })
        .collect();
    let run = trace_run(3, &[Transition::Shift, Transition::Shift, Transition::Shift, Transition::Reduce, Transition::Reduce])
        .map_err(|e| e.to_string())?;
    check(printed == expected && run.queues == expected, format!("Q = {printed:?}"))
}

fn data_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Trains through the same loaders the CLI uses; `done` decides when to stop.
fn train_until(
    pairs: &[(&str, &str)],
    data: &Path,
    done: impl Fn(&spinn::trainer::EvalLog) -> bool,
) -> Result<(usize, Option<spinn::trainer::EvalLog>), String> {
    let mut kv: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    kv.push(("data".into(), data.display().to_string()));
    let cfg = RunConfig::resolve(&kv).map_err(|e| e.to_string())?;
    let train = load_split(data, "train").map_err(|e| e.to_string())?;
    let dev = load_split(data, "dev").map_err(|e| e.to_string())?;
    let sentences = train.iter().chain(&dev).flat_map(|p| [p.premise_tokens.as_slice(), p.hypothesis_tokens.as_slice()]);
    let emb = build_embeddings(&cfg, sentences).map_err(|e| e.to_string())?;
    let tr = prepare_all(&train, cfg.seq_len, &emb).map_err(|e| e.to_string())?;
    let dv = prepare_all(&dev, cfg.seq_len, &emb).map_err(|e| e.to_string())?;
    let mut trainer = Trainer::new(cfg).map_err(|e| e.to_string())?;
    let mut hit = None;
    let summary = trainer
        .run(emb.matrix(), &tr, &dv, &mut |log, _| {
            if done(log) {
                hit = Some(log.clone());
                return false;
            }
            true
        })
        .map_err(|e| e.to_string())?;
    Ok((summary.steps, hit))
}

fn toy_overfit() -> Outcome {
    // The toy dev split is the training split itself, so dev accuracy is
    // accuracy on the 500 training pairs in inference mode.
    let (steps, hit) = train_until(
        &[("variant", "pi"), ("dim", "64"), ("max_steps", "5000"), ("eval_interval", "250")],
        &data_dir("toy"),
        |log| log.dev.accuracy() >= 0.95,
    )?;
    match hit {
        Some(log) => Ok(format!("train accuracy {:.4} at step {}", log.dev.accuracy(), log.step)),
        None => Err(format!("below 95% after {steps} steps")),
    }
}

fn transition_learning() -> Outcome {
    let (steps, hit) = train_until(
        &[("variant", "full"), ("max_steps", "10000"), ("eval_interval", "250")],
        &data_dir("grammar"),
        |log| log.dev.transition_accuracy().is_some_and(|a| a >= 0.99),
    )?;
    match hit {
        Some(log) => Ok(format!(
            "held-out transition accuracy {:.4} at step {}",
            log.dev.transition_accuracy().unwrap_or(0.0),
            log.step
        )),
        None => Err(format!("below 99% after {steps} steps")),
    }
}

fn speed_proxy() -> Outcome {
    let cfg = BenchConfig {
        models: vec![BenchModel::ThinStack, BenchModel::TreeRnn],
        batch_sizes: vec![1, 32, 64, 128, 256, 512],
        repetitions: 5,
        ..BenchConfig::default()
    };
    let report = cmd_bench(&cfg).map_err(|e| e.to_string())?;
    let speedup = report.speedup(BenchModel::ThinStack, 1, 64).unwrap_or(0.0);
    let spread = report.spread(BenchModel::TreeRnn).unwrap_or(1.0);
    check(
        speedup >= 5.0 && spread <= 0.10,
        format!("batch 64 / batch 1 = {speedup:.2}x, TreeRNN spread {:.1}%", 100.0 * spread),
    )
}

fn degenerate_totality() -> Outcome {
    let vocab = 30;
    let mut rng = RngState::new(90);
    let mut executed = 0;
    let mut k = 0u64;
    while executed < 1000 {
        let variant = Variant::ALL[k as usize % 3];
        let (mut enc, store) = encoder(variant, 8, 6, 12, 91 + k);
        let emb = table(vocab, 6, 92);
        let owned: Vec<(Vec<usize>, Vec<Transition>)> = (0..50)
            .filter_map(|_| {
                let n = 1 + rng.below(12);
                let ids: Vec<usize> = (0..n).map(|_| rng.below(vocab)).collect();
                let seq: Vec<Transition> = (0..23)
                    .map(|_| match rng.below(5) {
                        0 => Transition::Pad,
                        1 | 2 => Transition::Shift,
                        _ => Transition::Reduce,
                    })
                    .collect();
                validate(&seq, n).is_err().then_some((ids, seq))
            })
            .collect();
        let inputs: Vec<SentenceInput> =
            owned.iter().map(|(ids, s)| SentenceInput { tokens: ids, transitions: Some(s) }).collect();
        for mode in [RunMode::inference(TransitionMode::Given), RunMode::TRAIN] {
            let out = enc.forward(&store, &emb, &inputs, mode, &mut rng).map_err(|e| format!("{variant}: {e}"))?;
            if !out.h.data().iter().all(|v| v.is_finite()) {
                return Err(format!("{variant}: non-finite encoding"));
            }
        }
        executed += inputs.len();
        k += 1;
    }
    Ok(format!("{executed} invalid sequences across all variants, all encodings finite"))
}

fn spinn(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spinn")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("spinn {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn determinism() -> Outcome {
    let root = std::env::temp_dir().join(format!("spinn-acceptance-{}", std::process::id()));
    let run = |name: &str, extra: &[&str]| -> Result<Vec<u8>, String> {
        let out = root.join(name);
        let data = data_dir("toy");
        let mut args = vec![
            "train", "--variant", "full", "--dim", "16", "--set", "word_dim=16", "--set", "tracker_dim=8",
            "--set", "mlp_hidden=32", "--batch-size", "16", "--seed", "7", "--eval-interval", "10",
        ];
        args.extend_from_slice(extra);
        let (data, out_s) = (data.display().to_string(), out.display().to_string());
        args.extend_from_slice(&["--data", &data, "--out", &out_s]);
        spinn(&args)?;
        std::fs::read(out.join("last.ckpt")).map_err(|e| e.to_string())
    };
    let result = (|| {
        let a = run("a", &["--steps", "40"])?;
        let b = run("b", &["--steps", "40"])?;
        run("c", &["--steps", "20"])?;
        let ck = root.join("c/last.ckpt").display().to_string();
        let resumed = run("d", &["--steps", "40", "--resume", &ck])?;
        check(
            a == b && a == resumed,
            format!("identical runs equal: {}, resumed 20+20 equals 40 straight: {}", a == b, a == resumed),
        )
    })();
    std::fs::remove_dir_all(&root).ok();
    result
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("thin stack equals naive stack", 60, thin_stack_vs_naive),
        ("TreeLSTM equivalence", 60, treelstm_equivalence),
        ("gradient check", 300, gradients),
        ("batch identity", 60, batch_identity),
        ("counting laws", 30, counting_laws),
        ("golden trace", 10, golden_trace),
        ("toy overfit", 600, toy_overfit),
        ("transition learning", 900, transition_learning),
        ("speed proxy", 300, speed_proxy),
        ("degenerate totality", 60, degenerate_totality),
        ("determinism", 300, determinism),
    ];
    let only: Vec<usize> = std::env::var("SPINN_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > Duration::from_secs(*limit) => Err(format!("{d}; took longer than {limit}s")),
            o => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {number:>2} {name}: {detail} [{:.1}s]", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
