use spinn_wasm::{compare, pad_and_crop, trace};

#[test]
fn trace_accepts_actions_or_a_parse() {
    let a = trace("Spot sat down", "S S S R R").ok().unwrap();
    let b = trace("( Spot ( sat down ) )", "").ok().unwrap();
    assert_eq!(a, b);
    assert!(a.lines().last().unwrap().trim_end().ends_with('5'));
}

#[test]
fn pad_and_crop_reports_the_padded_form() {
    let s = pad_and_crop("Spot sat down", "S S S R R", 5).ok().unwrap();
    assert!(s.contains("P P P P S S S R R"), "{s}");
    assert!(s.ends_with("real tokens  3"), "{s}");
}

#[test]
fn compare_agrees_with_the_recursive_encoder() {
    for seed in 0..5 {
        let s = compare(20, 16, seed).ok().unwrap();
        let diff: f64 = s.lines().last().unwrap().split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!(diff <= 1e-12, "{s}");
    }
}
