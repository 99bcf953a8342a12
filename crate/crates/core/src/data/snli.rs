use std::io::{BufRead, Write};
use std::path::Path;

use serde_json::Value;

use super::{ExamplePair, Label};
use crate::error::{Result, SpinnError};
use crate::transitions::{format_transitions, parse_to_transitions, parse_transitions, transitions_to_tree, validate};

const LABEL_FIELD: &str = "gold_label";
const PREMISE_FIELD: &str = "sentence1_binary_parse";
const HYPOTHESIS_FIELD: &str = "sentence2_binary_parse";

/// Result of reading an SNLI-format file.
#[derive(Clone, Debug, Default)]
pub struct SnliLoad {
    pub pairs: Vec<ExamplePair>,
    /// Lines whose gold label is `-`.
    pub skipped_unlabeled: usize,
    /// Whitespace-only lines.
    pub skipped_blank: usize,
    pub lines: usize,
}

impl SnliLoad {
    pub fn skipped(&self) -> usize {
        self.skipped_unlabeled + self.skipped_blank
    }
}

fn data_err(line: usize, message: impl Into<String>) -> SpinnError {
    SpinnError::Data { line, message: message.into() }
}

/// Parses one JSON line. `Ok(None)` means an unlabeled example.
pub fn parse_snli_line(text: &str, line: usize) -> Result<Option<ExamplePair>> {
    let value: Value = serde_json::from_str(text).map_err(|e| data_err(line, format!("malformed JSON: {e}")))?;
    let field = |name: &str| -> Result<&str> {
        value
            .get(name)
            .ok_or_else(|| data_err(line, format!("missing field {name}")))?
            .as_str()
            .ok_or_else(|| data_err(line, format!("field {name} is not a string")))
    };
    let label = field(LABEL_FIELD)?;
    if label == "-" {
        return Ok(None);
    }
    let label: Label = label.parse().map_err(|_| data_err(line, format!("unknown {LABEL_FIELD} {label:?}")))?;
    let sentence = |name: &str| -> Result<(Vec<String>, Vec<_>)> {
        let (tokens, seq) =
            parse_to_transitions(field(name)?).map_err(|e| data_err(line, format!("{name}: {e}")))?;
        Ok((tokens, seq.into_actions()))
    };
    let (premise_tokens, premise_transitions) = sentence(PREMISE_FIELD)?;
    let (hypothesis_tokens, hypothesis_transitions) = sentence(HYPOTHESIS_FIELD)?;
    Ok(Some(ExamplePair { premise_tokens, premise_transitions, hypothesis_tokens, hypothesis_transitions, label }))
}

pub fn read_snli<R: BufRead>(reader: R) -> Result<SnliLoad> {
    let mut out = SnliLoad::default();
    for (i, text) in reader.lines().enumerate() {
        let text = text?;
        out.lines += 1;
        if text.trim().is_empty() {
            out.skipped_blank += 1;
            continue;
        }
        match parse_snli_line(&text, i + 1)? {
            Some(pair) => out.pairs.push(pair),
            None => out.skipped_unlabeled += 1,
        }
    }
    Ok(out)
}

pub fn load_snli(path: &Path) -> Result<SnliLoad> {
    read_snli(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Serialises a pair as an SNLI JSON line.
pub fn snli_line(pair: &ExamplePair) -> Result<String> {
    let premise = transitions_to_tree(&pair.premise_tokens, &pair.premise_transitions)?;
    let hypothesis = transitions_to_tree(&pair.hypothesis_tokens, &pair.hypothesis_transitions)?;
    let value = serde_json::json!({
        LABEL_FIELD: pair.label.name(),
        "sentence1": pair.premise_tokens.join(" "),
        "sentence2": pair.hypothesis_tokens.join(" "),
        PREMISE_FIELD: premise.render(),
        HYPOTHESIS_FIELD: hypothesis.render(),
    });
    Ok(value.to_string())
}

/// Writes the tab-separated cache: label, premise tokens, premise transitions,
/// hypothesis tokens, hypothesis transitions.
pub fn write_prepared<W: Write>(mut w: W, pairs: &[ExamplePair]) -> Result<()> {
    for p in pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            p.label,
            p.premise_tokens.join(" "),
            format_transitions(&p.premise_transitions),
            p.hypothesis_tokens.join(" "),
            format_transitions(&p.hypothesis_transitions),
        )?;
    }
    Ok(())
}

pub fn read_prepared<R: BufRead>(reader: R) -> Result<Vec<ExamplePair>> {
    let mut out = Vec::new();
    for (i, text) in reader.lines().enumerate() {
        let text = text?;
        let line = i + 1;
        if text.is_empty() {
            continue;
        }
        let cols: Vec<&str> = text.split('\t').collect();
        if cols.len() != 5 {
            return Err(data_err(line, format!("expected 5 tab-separated columns, found {}", cols.len())));
        }
        let label: Label = cols[0].parse().map_err(|_| data_err(line, format!("unknown label {:?}", cols[0])))?;
        let sentence = |tok: &str, tr: &str| -> Result<(Vec<String>, Vec<_>)> {
            let tokens: Vec<String> = tok.split(' ').map(str::to_string).collect();
            let seq = parse_transitions(tr).map_err(|e| data_err(line, e.to_string()))?;
            validate(&seq, tokens.len()).map_err(|e| data_err(line, SpinnError::from(e).to_string()))?;
            Ok((tokens, seq))
        };
        let (premise_tokens, premise_transitions) = sentence(cols[1], cols[2])?;
        let (hypothesis_tokens, hypothesis_transitions) = sentence(cols[3], cols[4])?;
        out.push(ExamplePair { premise_tokens, premise_transitions, hypothesis_tokens, hypothesis_transitions, label });
    }
    Ok(out)
}

pub fn load_prepared(path: &Path) -> Result<Vec<ExamplePair>> {
    read_prepared(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"gold_label": "neutral", "sentence1_binary_parse": "( ( A dog ) ( runs fast ) )", "sentence2_binary_parse": "( It ( is happy ) )"}"#;

    #[test]
    fn loads_skips_and_reports() {
        let text = format!("{GOOD}\n{}\n\n", GOOD.replace("neutral", "-"));
        let load = read_snli(text.as_bytes()).unwrap();
        assert_eq!(load.pairs.len(), 1);
        assert_eq!(load.skipped_unlabeled, 1);
        assert_eq!(load.pairs.len() + load.skipped(), load.lines);
        assert_eq!(load.pairs[0].premise_transitions.len(), 7);
        assert_eq!(load.pairs[0].label, Label::Neutral);
    }

    #[test]
    fn errors_carry_line_and_field() {
        let missing = GOOD.replace("sentence2_binary_parse", "other");
        let err = read_snli(format!("{GOOD}\n{missing}\n").as_bytes()).unwrap_err();
        match err {
            SpinnError::Data { line: 2, message } => assert!(message.contains("sentence2_binary_parse")),
            other => panic!("{other}"),
        }
        assert!(matches!(read_snli("{oops\n".as_bytes()), Err(SpinnError::Data { line: 1, .. })));
    }

    #[test]
    fn round_trips() {
        let pair = parse_snli_line(GOOD, 1).unwrap().unwrap();
        assert_eq!(parse_snli_line(&snli_line(&pair).unwrap(), 1).unwrap().unwrap(), pair);
        let mut buf = Vec::new();
        write_prepared(&mut buf, std::slice::from_ref(&pair)).unwrap();
        assert_eq!(read_prepared(buf.as_slice()).unwrap(), vec![pair]);
    }
}
