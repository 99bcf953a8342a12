//! WebAssembly bindings for the demo page in `www/`.

use spinn::encoder::{Encoder, EncoderConfig, RunMode, SentenceInput, TransitionMode, Variant};
use spinn::oracles::{recursive_treelstm, TreeLstmParams};
use spinn::tensor::{ops, Float, ParamStore, RngState};
use spinn::thin_stack::{format_trace, run_sequence};
use spinn::transitions::{self, parse_to_transitions, parse_transitions, random_tree, Transition};
use wasm_bindgen::prelude::*;

fn err(e: impl ToString) -> JsError {
    JsError::new(&e.to_string())
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn symbols(seq: &[Transition]) -> String {
    seq.iter().map(|a| a.symbol().to_string()).collect::<Vec<_>>().join(" ")
}

/// Step-by-step thin-stack trace. `sentence` is either plain tokens, with
/// `actions` such as "S S S R R", or a bracketed parse with `actions` empty.
#[wasm_bindgen]
pub fn trace(sentence: &str, actions: &str) -> Result<String, JsError> {
    let (tokens, seq) = if actions.trim().is_empty() {
        let (tokens, seq) = parse_to_transitions(sentence).map_err(err)?;
        (tokens, seq.into_actions())
    } else {
        (words(sentence), parse_transitions(actions).map_err(err)?)
    };
    let buffer: Vec<Float> = (0..tokens.len()).map(|i| i as Float).collect();
    let run = run_sequence(&buffer, 1, &seq, |l, r, out| out[0] = l[0] + r[0]).map_err(err)?;
    Ok(format_trace(&run, &tokens))
}

/// Pads (on the left) or crops a sentence to `n` tokens and `2n - 1` actions.
#[wasm_bindgen]
pub fn pad_and_crop(sentence: &str, actions: &str, n: usize) -> Result<String, JsError> {
    let seq = parse_transitions(actions).map_err(err)?;
    let padded = transitions::pad_and_crop(&words(sentence), &seq, n).map_err(err)?;
    let shown: Vec<&str> = padded.tokens.iter().map(|t| if t.is_empty() { "<pad>" } else { t.as_str() }).collect();
    Ok(format!(
        "tokens       {}\ntransitions  {}\nreal tokens  {}",
        shown.join(" "),
        symbols(&padded.transitions),
        padded.real_tokens
    ))
}

/// Encodes one random tree with the batched thin-stack encoder and with a
/// plain recursive TreeLSTM, and reports how far apart they are.
#[wasm_bindgen]
pub fn compare(leaves: usize, dim: usize, seed: u32) -> Result<String, JsError> {
    if !(1..=64).contains(&leaves) || !(1..=256).contains(&dim) {
        return Err(JsError::new("leaves must be in 1..=64 and dim in 1..=256"));
    }
    let mut rng = RngState::new(seed.into());
    let mut cfg = EncoderConfig::for_variant(Variant::PiNt);
    cfg.dim = dim;
    cfg.word_dim = dim;
    cfg.max_len = leaves;
    let mut store = ParamStore::new();
    let mut enc = Encoder::create(cfg, &mut store, &mut rng).map_err(err)?;
    let emb = ops::uniform_init(leaves, dim, -1.0, 1.0, &mut rng).map_err(err)?;
    let tree = random_tree(leaves, &mut rng);
    let ids: Vec<usize> = (0..leaves).collect();
    let seq = tree.transitions();
    let input = [SentenceInput { tokens: &ids, transitions: Some(&seq) }];
    let out = enc.forward(&store, &emb, &input, RunMode::inference(TransitionMode::Given), &mut rng).map_err(err)?;
    let params = TreeLstmParams::from_encoder(&enc, &store).map_err(err)?;
    let word = |tok: &str| emb.row(tok[1..].parse::<usize>().unwrap_or(0)).to_vec();
    let reference = recursive_treelstm(&tree, &word, &params);
    let thin = out.h.row(0);
    let diff = thin.iter().zip(&reference.h).map(|(a, b)| (a - b).abs()).fold(0.0, Float::max);
    let head = |v: &[Float]| v.iter().take(6).map(|x| format!("{x:+.6}")).collect::<Vec<_>>().join(" ");
    Ok(format!(
        "tree         {}\ntransitions  {}\nthin stack   {}\nrecursive    {}\nmax |diff|   {diff:.3e} over {dim} dims",
        tree.render(),
        symbols(&seq),
        head(thin),
        head(&reference.h)
    ))
}
