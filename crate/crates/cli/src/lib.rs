//! Command implementations behind the `spinn` binary.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use spinn::bench::{self, BenchConfig, BenchModel, BenchReport};
use spinn::checkpoint::Checkpoint;
use spinn::config::{parse_pairs, RunConfig, KEYS};
use spinn::data::{self, synthetic, EmbeddingTable, ExamplePair, PreparedSentence};
use spinn::encoder::{RunMode, SentenceInput, TransitionMode, Variant};
use spinn::gradcheck::{self, GradCheckConfig, GradCheckReport};
use spinn::model::EvalReport;
use spinn::tensor::{self, Float, RngState};
use spinn::thin_stack::{format_trace, run_sequence, ThinRun};
use spinn::trainer::{load_model, EvalLog, TrainSummary, Trainer};
use spinn::transitions::{parse_to_transitions, parse_transitions, Transition};
use spinn::SpinnError;

/// Seed stream for the out-of-vocabulary vector of GloVe tables.
const GLOVE_OOV_STREAM: u64 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit status 2.
    Usage(String),
    /// The command ran and failed: exit status 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<SpinnError> for CliError {
    fn from(e: SpinnError) -> Self {
        match e {
            SpinnError::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Worker-thread cap from `SPINN_THREADS`, if set.
pub fn thread_cap() -> CliResult<Option<usize>> {
    match std::env::var("SPINN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage(format!("SPINN_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Threads for matrix kernels: the machine's parallelism, capped by `SPINN_THREADS`.
pub fn default_threads() -> CliResult<usize> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(thread_cap()?.map_or(available, |cap| cap.min(available)))
}

/// Configuration layers: a config file, then individual flags, then `--set` pairs.
#[derive(Clone, Debug, Default)]
pub struct ConfigLayers {
    pub file: Option<PathBuf>,
    pub flags: Vec<(String, String)>,
    pub sets: Vec<String>,
}

impl ConfigLayers {
    pub fn pairs(&self) -> CliResult<Vec<(String, String)>> {
        let mut pairs = Vec::new();
        if let Some(path) = &self.file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
            pairs.extend(parse_pairs(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?);
        }
        pairs.extend(self.flags.iter().cloned());
        for s in &self.sets {
            let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--set expects key=value, got {s:?}")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    /// Defaults for the named variant, then every layer in order.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        Ok(RunConfig::resolve(&self.pairs()?)?)
    }
}

/// The resolved configuration as `# key = value` lines.
pub fn config_header(cfg: &RunConfig) -> String {
    cfg.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

/// Documented config keys, one per line.
pub fn key_reference() -> String {
    KEYS.iter().map(|(k, d)| format!("{k:<16}{d}\n")).collect()
}

/// Reads one split. `path` is either a directory holding `<split>.prep`,
/// `<split>.jsonl` or `snli_1.0_<split>.jsonl`, or a single file used for every split.
pub fn load_split(path: &Path, split: &str) -> CliResult<Vec<ExamplePair>> {
    if !path.exists() {
        return Err(usage(format!("data path {} does not exist", path.display())));
    }
    let file = if path.is_dir() {
        let candidates =
            [format!("{split}.prep"), format!("{split}.jsonl"), format!("snli_1.0_{split}.jsonl")].map(|n| path.join(n));
        candidates.iter().find(|p| p.is_file()).cloned().ok_or_else(|| {
            usage(format!("{} has no {split} split (looked for {split}.prep, {split}.jsonl)", path.display()))
        })?
    } else {
        path.to_path_buf()
    };
    read_pairs(&file)
}

/// Reads prepared (`.prep`) or SNLI-format files.
pub fn read_pairs(file: &Path) -> CliResult<Vec<ExamplePair>> {
    let loaded = if file.extension().is_some_and(|e| e == "prep") {
        data::load_prepared(file)
    } else {
        data::load_snli(file).map(|l| l.pairs)
    };
    loaded.map_err(|e| CliError::Runtime(format!("{}: {e}", file.display())))
}

fn limit(mut pairs: Vec<ExamplePair>, n: usize) -> Vec<ExamplePair> {
    if n > 0 {
        pairs.truncate(n);
    }
    pairs
}

/// Word vectors covering every token of `sentences`: GloVe when configured,
/// otherwise the deterministic synthetic table.
pub fn build_embeddings<'a, I>(cfg: &RunConfig, sentences: I) -> CliResult<EmbeddingTable>
where
    I: IntoIterator<Item = &'a [String]>,
{
    let tokens: HashSet<String> = sentences.into_iter().flatten().cloned().collect();
    let table = match &cfg.glove {
        Some(path) => {
            let mut rng = RngState::derived(cfg.seed, GLOVE_OOV_STREAM);
            EmbeddingTable::load_glove(path, cfg.word_dim, Some(&tokens), &mut rng)?
        }
        None => EmbeddingTable::synthetic(tokens.iter().map(String::as_str), cfg.word_dim, cfg.seed)?,
    };
    Ok(table)
}

fn pair_sentences(pairs: &[ExamplePair]) -> impl Iterator<Item = &[String]> {
    pairs.iter().flat_map(|p| [p.premise_tokens.as_slice(), p.hypothesis_tokens.as_slice()])
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub config: ConfigLayers,
    pub out: PathBuf,
    pub resume: Option<PathBuf>,
}

/// Files written by a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub summary: TrainSummary,
    pub last: PathBuf,
    pub best: Option<PathBuf>,
    pub log: PathBuf,
}

/// Trains, writing `config.txt`, `train.log`, `last.ckpt` (refreshed at every
/// evaluation) and `best.ckpt` under `args.out`. `echo` receives every log line.
pub fn cmd_train(args: &TrainArgs, echo: &mut dyn FnMut(&str)) -> CliResult<TrainOutcome> {
    let pairs = args.config.pairs()?;
    let mut trainer = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path).map_err(|e| usage(format!("cannot resume from {}: {e}", path.display())))?;
            let mut t = Trainer::from_checkpoint(&ck)?;
            let mut cfg = t.config.clone();
            for (k, v) in &pairs {
                if k == "variant" && v.parse::<Variant>()? != cfg.variant {
                    return Err(usage("cannot change the variant of a resumed run"));
                }
                cfg.set(k, v)?;
            }
            cfg.validate()?;
            t.config = cfg;
            t
        }
        None => Trainer::new(RunConfig::resolve(&pairs)?)?,
    };
    let cfg = trainer.config.clone();
    let data_path = cfg.data.clone().ok_or_else(|| usage("no training data: pass --data or set data = PATH"))?;
    let train = limit(load_split(&data_path, "train")?, cfg.train_limit);
    let dev = limit(load_split(&data_path, "dev")?, cfg.dev_limit);
    if train.len() < cfg.batch_size {
        return Err(usage(format!("{} training pairs cannot fill one batch of {}", train.len(), cfg.batch_size)));
    }
    let table = build_embeddings(&cfg, pair_sentences(&train).chain(pair_sentences(&dev)))?;
    let train_p = data::prepare_all(&train, cfg.seq_len, &table)?;
    let dev_p = data::prepare_all(&dev, cfg.seq_len, &table)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("config.txt"), cfg.to_text())?;
    let log_path = args.out.join("train.log");
    let mut log = io::BufWriter::new(std::fs::File::create(&log_path)?);
    let header = format!(
        "{}# train pairs {}  dev pairs {}  vocabulary {}\n",
        config_header(&cfg),
        train.len(),
        dev.len(),
        table.len()
    );
    log.write_all(header.as_bytes())?;
    for line in header.lines() {
        echo(line);
    }
    let last = args.out.join("last.ckpt");
    let mut io_error: Option<io::Error> = None;
    let mut on_eval = |entry: &EvalLog, t: &Trainer| -> bool {
        let line = entry.to_string();
        echo(&line);
        let result = writeln!(log, "{line}")
            .and_then(|_| log.flush())
            .and_then(|_| t.checkpoint().save(&last).map_err(|e| io::Error::other(e.to_string())));
        match result {
            Ok(()) => true,
            Err(e) => {
                io_error = Some(e);
                false
            }
        }
    };
    let summary = trainer.run(table.matrix(), &train_p, &dev_p, &mut on_eval)?;
    if let Some(e) = io_error {
        return Err(CliError::Runtime(format!("writing training output: {e}")));
    }
    trainer.checkpoint().save(&last)?;
    let best = match &trainer.best {
        Some(ck) => {
            let p = args.out.join("best.ckpt");
            ck.save(&p)?;
            Some(p)
        }
        None => None,
    };
    let tail = format!(
        "# done: {} steps, best dev accuracy {:.4} at step {}{}",
        summary.steps,
        summary.best_dev,
        summary.best_step,
        if summary.stopped_early { " (stopped early)" } else { "" }
    );
    writeln!(log, "{tail}")?;
    log.flush()?;
    echo(&tail);
    Ok(TrainOutcome { summary, last, best, log: log_path })
}

/// Loads a checkpoint, mapping a missing file to a usage error.
pub fn open_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    if !path.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", path.display())));
    }
    Ok(Checkpoint::load(path)?)
}

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: Option<PathBuf>,
    pub split: String,
    pub transition_mode: Option<TransitionMode>,
}

/// Evaluates a checkpoint; returns the resolved config and the report.
pub fn cmd_eval(args: &EvalArgs) -> CliResult<(RunConfig, EvalReport)> {
    let ck = open_checkpoint(&args.checkpoint)?;
    let (mut cfg, mut model) = load_model(&ck)?;
    if let Some(m) = args.transition_mode {
        cfg.transition_mode = m;
    }
    if cfg.transition_mode == TransitionMode::Predicted && !cfg.variant.has_tracker() {
        return Err(usage(format!("variant {} cannot predict transitions", cfg.variant)));
    }
    let path = args.data.clone().or_else(|| cfg.data.clone()).ok_or_else(|| usage("no data: pass --data"))?;
    cfg.data = Some(path.clone());
    let pairs = load_split(&path, &args.split)?;
    let table = build_embeddings(&cfg, pair_sentences(&pairs))?;
    let prepared = data::prepare_all(&pairs, cfg.seq_len, &table)?;
    let report =
        model.evaluate(table.matrix(), &prepared, cfg.batch_size.max(32), cfg.transition_mode, cfg.weights())?;
    Ok((cfg, report))
}

/// How `encode` reads its input lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodeInput {
    /// Binary parses such as `( ( the cat ) sat )`; transitions come from the brackets.
    Parsed,
    /// Whitespace-separated tokens; the model predicts its own transitions.
    Unparsed,
}

/// Encodes one sentence per non-empty line; returns one `D`-vector per line.
pub fn cmd_encode(checkpoint: &Path, lines: &[String], input: EncodeInput) -> CliResult<(RunConfig, Vec<Vec<Float>>)> {
    let ck = open_checkpoint(checkpoint)?;
    let (cfg, mut model) = load_model(&ck)?;
    if input == EncodeInput::Unparsed && !cfg.variant.has_tracker() {
        return Err(usage(format!(
            "variant {} cannot parse: it has no transition classifier; use --parsed",
            cfg.variant
        )));
    }
    let mut sentences: Vec<(Vec<String>, Option<Vec<Transition>>)> = Vec::new();
    for (i, line) in lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match input {
            EncodeInput::Parsed => {
                let (tokens, seq) = parse_to_transitions(line)
                    .map_err(|e| usage(format!("line {}: expected a binary parse: {e}", i + 1)))?;
                sentences.push((tokens, Some(seq.into_actions())));
            }
            EncodeInput::Unparsed => {
                if line.contains('(') || line.contains(')') {
                    return Err(usage(format!("line {}: brackets in unparsed input; use --parsed", i + 1)));
                }
                sentences.push((line.split_whitespace().map(str::to_string).collect(), None));
            }
        }
    }
    let table = build_embeddings(&cfg, sentences.iter().map(|(t, _)| t.as_slice()))?;
    let mut rng = RngState::new(0);
    let mut out = Vec::with_capacity(sentences.len());
    for chunk in sentences.chunks(cfg.batch_size.max(32)) {
        let h = match input {
            EncodeInput::Parsed => {
                let prepared: Vec<PreparedSentence> = chunk
                    .iter()
                    .map(|(t, s)| PreparedSentence::new(t, s.as_deref().expect("parsed"), cfg.seq_len, &table))
                    .collect::<spinn::Result<_>>()?;
                let inputs: Vec<SentenceInput<'_>> = prepared.iter().map(PreparedSentence::input).collect();
                let mode = RunMode::inference(TransitionMode::Given);
                model.encoder.forward(&model.store, table.matrix(), &inputs, mode, &mut rng)?.h
            }
            EncodeInput::Unparsed => {
                let ids: Vec<Vec<usize>> =
                    chunk.iter().map(|(t, _)| t.iter().map(|w| table.lookup(w)).collect()).collect();
                let inputs: Vec<SentenceInput<'_>> =
                    ids.iter().map(|ids| SentenceInput { tokens: ids, transitions: None }).collect();
                let mode = RunMode::inference(TransitionMode::Predicted);
                model.encoder.forward(&model.store, table.matrix(), &inputs, mode, &mut rng)?.h
            }
        };
        out.extend((0..h.rows()).map(|r| h.row(r).to_vec()));
    }
    Ok((cfg, out))
}

/// Tab-separated vector with enough digits to round-trip.
pub fn format_vector(v: &[Float]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join("\t")
}

/// Runs the thin stack on `sentence` and renders one row per step with the action,
/// the row written and the live queue. `sentence` may be a binary parse, in which
/// case `transitions` must be absent.
pub fn cmd_trace(sentence: &str, transitions: Option<&str>) -> CliResult<String> {
    let (tokens, seq) = match transitions {
        Some(t) => {
            if sentence.contains('(') {
                return Err(usage("give either a bracketed parse or --transitions, not both"));
            }
            let tokens: Vec<String> = sentence.split_whitespace().map(str::to_string).collect();
            (tokens, parse_transitions(t).map_err(|e| usage(e.to_string()))?)
        }
        None if sentence.contains('(') => {
            let (tokens, seq) = parse_to_transitions(sentence).map_err(|e| usage(e.to_string()))?;
            (tokens, seq.into_actions())
        }
        None if sentence.split_whitespace().count() == 1 => {
            (vec![sentence.trim().to_string()], vec![Transition::Shift])
        }
        None => return Err(usage("plain sentences need --transitions (or pass a bracketed parse)")),
    };
    let run = trace_run(tokens.len(), &seq)?;
    Ok(format_trace(&run, &tokens))
}

/// The traced run: every buffer slot holds its index, composition adds.
pub fn trace_run(tokens: usize, seq: &[Transition]) -> CliResult<ThinRun> {
    let buffer: Vec<Float> = (0..tokens).map(|i| i as Float).collect();
    let sum = |l: &[Float], r: &[Float], out: &mut [Float]| out[0] = l[0] + r[0];
    Ok(run_sequence(&buffer, 1, seq, sum)?)
}

pub fn cmd_bench(cfg: &BenchConfig) -> CliResult<BenchReport> {
    Ok(bench::run_bench(cfg)?)
}

pub fn parse_bench_models(s: &str) -> CliResult<Vec<BenchModel>> {
    if s == "all" {
        return Ok(BenchModel::ALL.to_vec());
    }
    s.split(',').map(|m| m.trim().parse::<BenchModel>().map_err(CliError::from)).collect()
}

pub fn parse_list(s: &str, what: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| usage(format!("{what}: bad entry {p:?}"))))
        .collect()
}

/// Checks the named variants (`all` for every one) at toy scale.
pub fn cmd_gradcheck(variants: &str, seed: u64) -> CliResult<Vec<GradCheckReport>> {
    let list: Vec<Variant> = if variants == "all" {
        vec![Variant::PiNt, Variant::Pi, Variant::Full]
    } else {
        variants.split(',').map(|v| v.trim().parse::<Variant>()).collect::<spinn::Result<_>>()?
    };
    list.into_iter().map(|v| Ok(gradcheck::run(&GradCheckConfig::toy(v, seed))?)).collect()
}

/// Bundled synthetic corpora.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticCorpus {
    /// 500 labelled pairs; dev is the training set itself, for overfitting checks.
    Toy,
    /// 2,000 grammar sentences paired up, with a fifth held out as dev.
    Grammar,
}

impl std::str::FromStr for SyntheticCorpus {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "toy" => Ok(SyntheticCorpus::Toy),
            "grammar" => Ok(SyntheticCorpus::Grammar),
            _ => Err(usage(format!("unknown synthetic corpus {s:?} (toy, grammar)"))),
        }
    }
}

pub const TOY_PAIRS: usize = 500;
pub const GRAMMAR_PAIRS: usize = 1000;
pub const GRAMMAR_DEV_FRACTION: f64 = 0.2;

/// The train and dev splits of a synthetic corpus.
pub fn synthetic_splits(corpus: SyntheticCorpus, seed: u64) -> (Vec<ExamplePair>, Vec<ExamplePair>) {
    match corpus {
        SyntheticCorpus::Toy => {
            let pairs = synthetic::toy_pairs(TOY_PAIRS, seed);
            (pairs.clone(), pairs)
        }
        SyntheticCorpus::Grammar => {
            synthetic::split_held_out(synthetic::grammar_pairs(GRAMMAR_PAIRS, seed), GRAMMAR_DEV_FRACTION)
        }
    }
}

fn write_snli(path: &Path, pairs: &[ExamplePair]) -> CliResult<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    for p in pairs {
        writeln!(w, "{}", data::snli_line(p)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `train.jsonl` and `dev.jsonl` of a synthetic corpus in SNLI format.
pub fn cmd_prep_synthetic(corpus: SyntheticCorpus, seed: u64, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let (train, dev) = synthetic_splits(corpus, seed);
    let mut written = Vec::new();
    for (name, pairs) in [("train.jsonl", &train), ("dev.jsonl", &dev)] {
        let p = out_dir.join(name);
        write_snli(&p, pairs)?;
        written.push(p);
    }
    Ok(written)
}

/// Converts an SNLI-format file to the tab-separated cache read by `train`/`eval`.
/// Returns `(kept, skipped)`.
pub fn cmd_prep_snli(input: &Path, output: &Path) -> CliResult<(usize, usize)> {
    if !input.is_file() {
        return Err(usage(format!("input {} does not exist", input.display())));
    }
    let loaded = data::load_snli(input).map_err(|e| CliError::Runtime(format!("{}: {e}", input.display())))?;
    let mut w = io::BufWriter::new(std::fs::File::create(output)?);
    data::write_prepared(&mut w, &loaded.pairs)?;
    w.flush()?;
    Ok((loaded.pairs.len(), loaded.skipped()))
}

/// Non-empty lines from a file, or standard input for `-`.
pub fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    if path == Path::new("-") {
        return Ok(io::stdin().lock().lines().collect::<io::Result<_>>()?);
    }
    if !path.is_file() {
        return Err(usage(format!("input {} does not exist", path.display())));
    }
    let f = io::BufReader::new(std::fs::File::open(path)?);
    Ok(f.lines().collect::<io::Result<_>>()?)
}

/// Bench settings whose thread count honours `SPINN_THREADS`.
pub fn bench_threads(requested: usize) -> CliResult<usize> {
    Ok(thread_cap()?.map_or(requested, |cap| requested.min(cap)).max(1))
}

/// Sets the kernel thread count for commands other than `bench`.
pub fn init_threads() -> CliResult<()> {
    tensor::set_threads(default_threads()?);
    Ok(())
}
