use std::alloc::{GlobalAlloc, Layout, System};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Args, Parser, Subcommand};
use spinn::bench::{AllocStats, BenchConfig};
use spinn::encoder::TransitionMode;
use spinn_cli::*;

/// Counts heap allocations so benchmark reports can show them.
struct Counting;

static ALLOCATIONS: AtomicU64 = AtomicU64::new(0);
static ALLOCATED_BYTES: AtomicU64 = AtomicU64::new(0);

// SAFETY: defers every operation to the system allocator.
unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        ALLOCATED_BYTES.fetch_add(layout.size() as u64, Ordering::Relaxed);
        System.alloc(layout)
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        ALLOCATED_BYTES.fetch_add(layout.size() as u64, Ordering::Relaxed);
        System.alloc_zeroed(layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        ALLOCATED_BYTES.fetch_add(new_size as u64, Ordering::Relaxed);
        System.realloc(ptr, layout, new_size)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn alloc_stats() -> AllocStats {
    AllocStats { allocations: ALLOCATIONS.load(Ordering::Relaxed), bytes: ALLOCATED_BYTES.load(Ordering::Relaxed) }
}

#[derive(Parser)]
#[command(name = "spinn", version, about = "Shift-reduce TreeLSTM sentence encoders with a batched thin stack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigFlags {
    /// Flat `key = value` config file, applied over the variant defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key as key=value, applied last. Repeatable. See `spinn keys`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// pi_nt, pi or full.
    #[arg(long)]
    variant: Option<String>,
    /// Directory with train/dev splits, or one SNLI-format file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// GloVe text file.
    #[arg(long)]
    glove: Option<PathBuf>,
    /// Model dimension D.
    #[arg(long)]
    dim: Option<usize>,
    /// Training steps (`max_steps`).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    eval_interval: Option<usize>,
}

impl ConfigFlags {
    fn layers(&self) -> ConfigLayers {
        let mut flags = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v));
            }
        };
        push("variant", self.variant.clone());
        push("data", self.data.as_ref().map(|p| p.display().to_string()));
        push("glove", self.glove.as_ref().map(|p| p.display().to_string()));
        push("dim", self.dim.map(|v| v.to_string()));
        push("max_steps", self.steps.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("lr", self.lr.map(|v| v.to_string()));
        push("eval_interval", self.eval_interval.map(|v| v.to_string()));
        ConfigLayers { file: self.config.clone(), flags, sets: self.set.clone() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes config.txt, train.log, last.ckpt and best.ckpt.
    Train {
        #[command(flatten)]
        config: ConfigFlags,
        /// Output directory.
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
        /// Continue from a checkpoint; flags override its config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Accuracy report of a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Data directory or file; defaults to the one the model was trained on.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "dev")]
        split: String,
        /// given or predicted.
        #[arg(long)]
        transition_mode: Option<String>,
    },
    /// Print one tab-separated vector per input sentence.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input file, one sentence per line, or - for standard input.
        #[arg(long, default_value = "-")]
        input: PathBuf,
        /// Lines are binary parses such as "( ( the cat ) sat )".
        #[arg(long, conflicts_with = "unparsed")]
        parsed: bool,
        /// Lines are plain tokens; the model predicts the transitions.
        #[arg(long)]
        unparsed: bool,
    },
    /// Show the thin stack step by step.
    Trace {
        /// Tokens separated by spaces, or a bracketed binary parse.
        sentence: String,
        /// Actions such as "S S S R R" or "SSSRR".
        #[arg(long)]
        transitions: Option<String>,
    },
    /// Throughput of the batched thin stack, a per-example TreeRNN and an LSTM.
    Bench {
        /// Comma-separated batch sizes.
        #[arg(long, default_value = "1,32,64,128,256,512")]
        batch_sizes: String,
        /// thin-stack, tree-rnn, lstm (comma-separated) or all.
        #[arg(long, default_value = "all")]
        models: String,
        #[arg(long, default_value_t = 30)]
        seq_len: usize,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Sentences per timed repetition (at least one batch).
        #[arg(long, default_value_t = 128)]
        sentences: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write line-delimited JSON here (- for standard output).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare analytic gradients with finite differences at toy scale.
    Gradcheck {
        /// pi_nt, pi, full (comma-separated) or all.
        #[arg(long, default_value = "all")]
        variant: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Convert SNLI JSONL to the cached format, or write a bundled synthetic corpus.
    Prep {
        /// SNLI-format input file.
        #[arg(long, required_unless_present = "synthetic")]
        input: Option<PathBuf>,
        /// Output file (.prep) or, with --synthetic, output directory.
        #[arg(long)]
        output: PathBuf,
        /// toy or grammar.
        #[arg(long, conflicts_with = "input")]
        synthetic: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// List every config key.
    Keys,
}

fn print_header(cfg: &spinn::config::RunConfig) {
    print!("{}", config_header(cfg));
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train { config, out, resume } => {
            init_threads()?;
            let args = TrainArgs { config: config.layers(), out, resume };
            let outcome = cmd_train(&args, &mut |line| println!("{line}"))?;
            println!("# wrote {}", outcome.last.display());
            if let Some(b) = outcome.best {
                println!("# wrote {}", b.display());
            }
        }
        Command::Eval { checkpoint, data, split, transition_mode } => {
            init_threads()?;
            let transition_mode = transition_mode.map(|m| m.parse::<TransitionMode>()).transpose()?;
            let (cfg, report) = cmd_eval(&EvalArgs { checkpoint, data, split: split.clone(), transition_mode })?;
            print_header(&cfg);
            println!("# split {split}");
            println!("{report}");
        }
        Command::Encode { checkpoint, input, parsed, unparsed } => {
            init_threads()?;
            let mode = match (parsed, unparsed) {
                (true, false) => EncodeInput::Parsed,
                (false, true) => EncodeInput::Unparsed,
                _ => return Err(CliError::Usage("pass exactly one of --parsed or --unparsed".into())),
            };
            let lines = read_lines(&input)?;
            let (cfg, vectors) = cmd_encode(&checkpoint, &lines, mode)?;
            eprint!("{}", config_header(&cfg));
            let stdout = std::io::stdout();
            let mut out = std::io::BufWriter::new(stdout.lock());
            for v in vectors {
                writeln!(out, "{}", format_vector(&v))?;
            }
            out.flush()?;
        }
        Command::Trace { sentence, transitions } => {
            print!("{}", cmd_trace(&sentence, transitions.as_deref())?);
        }
        Command::Bench { batch_sizes, models, seq_len, dim, reps, sentences, threads, seed, json } => {
            let cfg = BenchConfig {
                models: parse_bench_models(&models)?,
                batch_sizes: parse_list(&batch_sizes, "--batch-sizes")?,
                seq_len,
                dim,
                word_dim: dim,
                repetitions: reps,
                min_sentences: sentences,
                threads: bench_threads(threads)?,
                seed,
                alloc_probe: Some(alloc_stats),
                ..BenchConfig::default()
            };
            let report = cmd_bench(&cfg)?;
            print!("{report}");
            match json {
                Some(p) if p.as_os_str() == "-" => print!("{}", report.json_lines()),
                Some(p) => std::fs::write(&p, report.json_lines())?,
                None => {}
            }
        }
        Command::Gradcheck { variant, seed } => {
            init_threads()?;
            let reports = cmd_gradcheck(&variant, seed)?;
            let mut ok = true;
            for r in &reports {
                println!("{r}");
                ok &= r.passed();
            }
            if !ok {
                return Err(CliError::Runtime("gradient check failed".into()));
            }
        }
        Command::Prep { input, output, synthetic, seed } => match (synthetic, input) {
            (Some(name), _) => {
                for p in cmd_prep_synthetic(name.parse()?, seed, &output)? {
                    println!("wrote {}", p.display());
                }
            }
            (None, Some(input)) => {
                let (kept, skipped) = cmd_prep_snli(&input, &output)?;
                println!("wrote {} ({kept} pairs, {skipped} lines skipped)", output.display());
            }
            (None, None) => return Err(CliError::Usage("pass --input or --synthetic".into())),
        },
        Command::Keys => print!("{}", key_reference()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
