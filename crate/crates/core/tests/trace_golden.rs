use spinn::tensor::Float;
use spinn::thin_stack::{format_trace, run_sequence, RowSource};
use spinn::transitions::parse_transitions;

fn labels(words: &[&str]) -> Vec<String> {
    words.iter().map(|s| s.to_string()).collect()
}

fn sum(l: &[Float], r: &[Float], out: &mut [Float]) {
    for i in 0..out.len() {
        out[i] = l[i] + r[i];
    }
}

#[test]
fn spot_sat_down() {
    let seq = parse_transitions("S S S R R").unwrap();
    let run = run_sequence(&[1.0, 2.0, 3.0], 1, &seq, sum).unwrap();
    let queues: Vec<Vec<usize>> = run.queues.clone();
    assert_eq!(queues, vec![vec![1], vec![1, 2], vec![1, 2, 3], vec![1, 4], vec![5]]);
    let sources: Vec<RowSource> = run.records.iter().map(|r| r.source).collect();
    assert_eq!(
        sources,
        vec![
            RowSource::Buffer(0),
            RowSource::Buffer(1),
            RowSource::Buffer(2),
            RowSource::Compose { left: 2, right: 3 },
            RowSource::Compose { left: 1, right: 4 },
        ]
    );
    assert_eq!(run.output(), &[6.0]);
    let trace = format_trace(&run, &labels(&["Spot", "sat", "down"]));
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[3].contains("(sat down)") && rows[3].ends_with("1 4"));
    assert!(rows[4].contains("(Spot (sat down))") && rows[4].ends_with('5'));
}

#[test]
fn single_word_is_one_row() {
    let run = run_sequence(&[4.0], 1, &parse_transitions("S").unwrap(), sum).unwrap();
    assert_eq!(format_trace(&run, &labels(&["Spot"])).lines().count(), 2);
}

#[test]
fn degenerate_steps_are_marked() {
    let run = run_sequence(&[1.0], 1, &parse_transitions("R S S").unwrap(), sum).unwrap();
    let trace = format_trace(&run, &labels(&["a"]));
    assert!(trace.contains("degenerate pop"), "{trace}");
    assert!(trace.contains("empty buffer"), "{trace}");
}
