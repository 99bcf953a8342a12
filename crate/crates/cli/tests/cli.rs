use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn spinn(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_spinn"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    if let Some(s) = stdin {
        child.stdin.take().unwrap().write_all(s.as_bytes()).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("spinn-cli-{name}-{}", std::process::id()));
    std::fs::remove_dir_all(&p).ok();
    p
}

#[test]
fn trace_prints_the_queue_for_both_input_forms() {
    let a = spinn(&["trace", "Spot sat down", "--transitions", "S S S R R"], None);
    let b = spinn(&["trace", "( Spot ( sat down ) )"], None);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let last = stdout(&a).lines().last().unwrap().to_string();
    assert!(last.contains("(Spot (sat down))") && last.trim_end().ends_with('5'), "{last}");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["trace", "Spot sat down"],
        vec!["train", "--data", "/nonexistent/spinn", "--out", "/tmp/unused"],
        vec!["train", "--set", "no_such_key=1"],
        vec!["bench", "--batch-sizes", "1,x"],
        vec!["gradcheck", "--variant", "lstm"],
    ] {
        assert_eq!(spinn(&args, None).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn train_eval_encode_round_trip() {
    let out = scratch("run");
    let out_s = out.display().to_string();
    let grammar = data("grammar");
    let train = spinn(
        &[
            "train", "--variant", "full", "--data", &grammar, "--dim", "12", "--set", "word_dim=8", "--set",
            "tracker_dim=6", "--set", "mlp_hidden=16", "--steps", "20", "--eval-interval", "10", "--out", &out_s,
        ],
        None,
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    for f in ["config.txt", "train.log", "last.ckpt", "best.ckpt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let ckpt = out.join("last.ckpt").display().to_string();

    let eval = spinn(&["eval", "--checkpoint", &ckpt, "--transition-mode", "predicted"], None);
    assert!(eval.status.success());
    let text = stdout(&eval);
    assert!(text.starts_with("# ") && text.contains("transition accuracy"), "{text}");

    let parsed = spinn(&["encode", "--checkpoint", &ckpt, "--parsed"], Some("( ( the cat ) sat )\n( a dog )\n"));
    let unparsed = spinn(&["encode", "--checkpoint", &ckpt, "--unparsed"], Some("the cat sat\n"));
    for o in [&parsed, &unparsed] {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for line in stdout(o).lines() {
            let values: Vec<f64> = line.split('\t').map(|v| v.parse().unwrap()).collect();
            assert_eq!(values.len(), 12);
        }
    }
    assert_eq!(stdout(&parsed).lines().count(), 2);
    std::fs::remove_dir_all(&out).ok();
}

#[test]
fn unparsed_input_needs_a_tracker() {
    let out = scratch("pint");
    let out_s = out.display().to_string();
    let toy = data("toy");
    let train = spinn(
        &["train", "--variant", "pi_nt", "--data", &toy, "--dim", "8", "--set", "word_dim=8", "--steps", "2", "--out", &out_s],
        None,
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let ckpt = out.join("last.ckpt").display().to_string();
    assert_eq!(spinn(&["encode", "--checkpoint", &ckpt, "--unparsed"], Some("a b\n")).status.code(), Some(2));
    std::fs::remove_dir_all(&out).ok();
}
