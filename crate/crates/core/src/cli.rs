//! Command-line entry point.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{resolve_config, Config};
use crate::corpus::{build_msa, ingest_with, FunctionStore, NGramIndex};
use crate::embeddings::{build_vocab_multi, train_embeddings, EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate, generate_synthetic, load_benchmark, load_dataset, transfer_protocol, Benchmark, Split, SynthConfig,
};
use crate::lexer::Language;
use crate::pipeline::{score_pairs, MsaCache};
use crate::scorer::classify;
use crate::trainer::{grad_check, toy_config, train, Checkpoint, Loss, TrainInputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Largest relative error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "alphacc", version, about = "Token-sequence code clone detection")]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override, repeatable: --set R=3.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads; 1 gives fully serial execution.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Same as --threads 1.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Log more (-v debug, -vv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Lang {
    Java,
    C,
}

impl From<Lang> for Language {
    fn from(l: Lang) -> Self {
        match l {
            Lang::Java => Language::JavaLike,
            Lang::C => Language::CLike,
        }
    }
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Source directory or function JSON-lines file.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value = "java")]
    language: Lang,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Retrieval index commands.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Token embedding commands.
    Embed {
        #[command(subcommand)]
        action: EmbedAction,
    },
    /// Print the Code MSA of one function as JSON.
    Msa {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        index: PathBuf,
        /// Function id in the corpus.
        #[arg(long)]
        function: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a checkpoint on labeled pairs.
    Train {
        /// Dataset directory, or a pairs file next to functions.jsonl.
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        index: PathBuf,
        /// Pretrained token embeddings.
        #[arg(long)]
        embed: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score function pairs with a checkpoint.
    Detect {
        #[arg(long)]
        model: PathBuf,
        /// Functions to score (functions.jsonl or a dataset directory).
        #[arg(long)]
        functions: PathBuf,
        /// JSON-lines file of {"id1", "id2"} pairs.
        #[arg(long)]
        pairs: PathBuf,
        /// Retrieval corpus; defaults to the scored functions.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "corpus")]
        index: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Override the checkpoint's threshold.
        #[arg(long)]
        threshold: Option<f64>,
        /// Retrieval corpus; defaults to the dataset's functions.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, requires = "corpus")]
        index: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on one dataset, fine-tune on a fraction of another and test there.
    Transfer {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic clone benchmark.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        problems: usize,
        #[arg(long, default_value_t = 6)]
        variants: usize,
        /// Negatives per positive.
        #[arg(long, default_value_t = 1.0)]
        negative_ratio: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the toy model's gradients.
    Gradcheck {
        #[arg(long, default_value_t = 64)]
        probes: usize,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the version.
    Version,
}

#[derive(Debug, Subcommand)]
enum IndexAction {
    /// Build the n-gram index of a corpus.
    Build {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum EmbedAction {
    /// Train skip-gram token embeddings.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Dataset whose functions join the training text when embed.include_dataset is set.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not size the thread pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn config(cli: &Cli) -> Result<Config> {
    resolve_config(cli.config.as_deref(), &cli.set)
}

fn emit(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_corpus(args: &CorpusArgs, cfg: &Config) -> Result<FunctionStore> {
    let ingested = ingest_with(&args.corpus, args.language.into(), cfg.context)?;
    info!(
        "corpus {}: {} functions, {} skipped",
        args.corpus.display(),
        ingested.store.len(),
        ingested.skipped.len()
    );
    Ok(ingested.store)
}

fn load_index(path: &Path, corpus: &FunctionStore) -> Result<NGramIndex> {
    let index = NGramIndex::load(path)?;
    if !index.built_from(corpus) {
        return Err(Error::Data(format!(
            "index {} was built from a different corpus",
            path.display()
        )));
    }
    Ok(index)
}

fn provenance(cfg: &Config, extra: &[(&str, String)]) -> String {
    let mut s = cfg.to_text();
    for (k, v) in extra {
        s.push_str(&format!("{k}={v}\n"));
    }
    s
}

/// Benchmark for a path that is either a dataset directory or a pairs file.
fn load_training_data(path: &Path) -> Result<Benchmark> {
    if path.is_dir() {
        return load_benchmark(path);
    }
    let ds = load_dataset(path, Split::Train)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let records = crate::corpus::read_function_records(&dir.join(crate::eval::FUNCTIONS_FILE))?;
    Benchmark::from_parts(records, ds.functions.language(), ds.pairs, Vec::new(), Vec::new())
}

#[derive(Debug, Deserialize)]
struct QueryPair {
    id1: String,
    id2: String,
}

#[derive(Debug, Serialize)]
struct Detection<'a> {
    id1: &'a str,
    id2: &'a str,
    score: f64,
    clone: bool,
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Version => {
            println!("alphacc {}", env!("CARGO_PKG_VERSION"));
        }
        Command::Index {
            action: IndexAction::Build { corpus, out },
        } => {
            let cfg = config(cli)?;
            let store = load_corpus(corpus, &cfg)?;
            let mut index = NGramIndex::build(&store, cfg.ngram, cfg.buckets);
            index.append_provenance(&provenance(&cfg, &[]));
            index.save(out)?;
            emit(
                None,
                &json!({
                    "functions": index.len(),
                    "n": index.n(),
                    "buckets": index.bucket_count(),
                    "corpus_digest": store.digest(),
                    "index_digest": index.digest(),
                }),
            )?;
        }
        Command::Embed {
            action: EmbedAction::Train { corpus, dataset, out },
        } => {
            let cfg = config(cli)?;
            let store = load_corpus(corpus, &cfg)?;
            let extra = match dataset {
                Some(d) if cfg.embed_include_dataset => Some(load_training_data(d)?.functions),
                _ => None,
            };
            let mut stores = vec![&store];
            stores.extend(extra.as_ref());
            let vocab = build_vocab_multi(&stores, cfg.embed_min_count);
            let table = train_embeddings(&stores, &vocab, &cfg.sgns())?;
            let prov = provenance(
                &cfg,
                &[("corpus_digest", store.digest()), ("vocab_digest", vocab.digest())],
            );
            table.save(out, &prov)?;
            emit(
                None,
                &json!({ "vocab_size": vocab.len(), "dim": table.dim, "vocab_digest": vocab.digest() }),
            )?;
        }
        Command::Msa {
            corpus,
            index,
            function,
            out,
        } => {
            let cfg = config(cli)?;
            let store = load_corpus(corpus, &cfg)?;
            let index = load_index(index, &store)?;
            let f = store
                .get(function)
                .ok_or_else(|| Error::Data(format!("unknown function `{function}`")))?;
            let msa = build_msa(f, &store, &index, cfg.r, cfg.l);
            let rows: Vec<_> = msa
                .rows
                .iter()
                .zip(&msa.row_ids)
                .map(|(row, id)| {
                    let toks: Vec<&str> = row.iter().filter(|c| c.valid).map(|c| c.token.text.as_str()).collect();
                    json!({ "id": id, "valid": toks.len(), "tokens": toks })
                })
                .collect();
            emit(out.as_deref(), &json!({ "R": cfg.r, "L": cfg.l, "rows": rows }))?;
        }
        Command::Train {
            dataset,
            corpus,
            index,
            embed,
            out,
        } => {
            let cfg = config(cli)?;
            let bench = load_training_data(dataset)?;
            let store = load_corpus(corpus, &cfg)?;
            let index = load_index(index, &store)?;
            let table = embed.as_deref().map(EmbeddingTable::load).transpose()?;
            let vocab: Vocabulary = match &table {
                Some(t) => t.vocab.clone(),
                None => build_vocab_multi(&[&store, &bench.functions], cfg.embed_min_count),
            };
            let inputs = TrainInputs {
                functions: &bench.functions,
                train: &bench.train,
                validation: &bench.validation,
                corpus: &store,
                index: &index,
            };
            let (ckpt, report) = train(&inputs, &vocab, table.as_ref(), &cfg)?;
            ckpt.save(out)?;
            emit(
                None,
                &json!({
                    "steps": report.steps,
                    "pairs_seen": report.pairs_seen,
                    "epoch_loss": report.epoch_loss,
                    "validation_f1": report.validation_f1,
                    "tau": ckpt.tau,
                    "checkpoint_digest": ckpt.digest(),
                }),
            )?;
        }
        Command::Detect {
            model,
            functions,
            pairs,
            corpus,
            index,
            out,
        } => {
            let cfg = config(cli)?;
            let ckpt = Checkpoint::load(model)?;
            let fpath = if functions.is_dir() {
                functions.join(crate::eval::FUNCTIONS_FILE)
            } else {
                functions.clone()
            };
            let records = crate::corpus::read_function_records(&fpath)?;
            let lang = records
                .first()
                .map(|r| r.language.parse::<Language>())
                .transpose()?
                .unwrap_or(Language::JavaLike);
            let fstore = crate::corpus::store_from_records_with(&records, lang, cfg.context).store;
            let (store, index) = match (corpus, index) {
                (Some(c), Some(i)) => {
                    let s = ingest_with(c, lang, cfg.context)?.store;
                    let i = load_index(i, &s)?;
                    (s, i)
                }
                (Some(c), None) => {
                    let s = ingest_with(c, lang, cfg.context)?.store;
                    let i = NGramIndex::build(&s, ckpt.config.ngram, ckpt.config.buckets);
                    (s, i)
                }
                _ => {
                    let i = NGramIndex::build(&fstore, ckpt.config.ngram, ckpt.config.buckets);
                    (fstore.clone(), i)
                }
            };
            let text = fs::read_to_string(pairs).map_err(|e| Error::io(pairs, e))?;
            let mut queries = Vec::new();
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let q: QueryPair = serde_json::from_str(line)
                    .map_err(|e| Error::Data(format!("{}:{}: {e}", pairs.display(), n + 1)))?;
                queries.push(q);
            }
            let c = &ckpt.config;
            let mut cache = MsaCache::new(c.r, c.l, &index);
            cache.extend(
                queries.iter().flat_map(|q| [q.id1.as_str(), q.id2.as_str()]),
                &fstore,
                &store,
                &index,
                &ckpt.vocab,
            )?;
            let ids: Vec<(&str, &str)> = queries.iter().map(|q| (q.id1.as_str(), q.id2.as_str())).collect();
            let sim = ckpt.similarity();
            let scores = score_pairs(&ckpt.model, &cache, &ids, &sim)?;
            let mut buf = Vec::new();
            for (q, s) in queries.iter().zip(&scores) {
                let d = Detection {
                    id1: &q.id1,
                    id2: &q.id2,
                    score: s.value,
                    clone: classify(*s, sim.tau),
                };
                serde_json::to_writer(&mut buf, &d).map_err(|e| Error::Data(e.to_string()))?;
                buf.push(b'\n');
            }
            match out {
                Some(p) => fs::write(p, &buf).map_err(|e| Error::io(p, e))?,
                None => std::io::stdout()
                    .write_all(&buf)
                    .map_err(|e| Error::io("<stdout>", e))?,
            }
        }
        Command::Eval {
            model,
            dataset,
            split,
            threshold,
            corpus,
            index,
            out,
        } => {
            let cfg = config(cli)?;
            let ckpt = Checkpoint::load(model)?;
            let split: Split = split.parse()?;
            let ds = load_dataset(dataset, split)?;
            let lang = ds.functions.language();
            let (store, idx) = match (corpus, index) {
                (Some(c), Some(i)) => {
                    let s = ingest_with(c, lang, cfg.context)?.store;
                    let i = load_index(i, &s)?;
                    (s, i)
                }
                (Some(c), None) => {
                    let s = ingest_with(c, lang, cfg.context)?.store;
                    let i = NGramIndex::build(&s, ckpt.config.ngram, ckpt.config.buckets);
                    (s, i)
                }
                _ => {
                    let i = NGramIndex::build(&ds.functions, ckpt.config.ngram, ckpt.config.buckets);
                    (ds.functions.clone(), i)
                }
            };
            let report = evaluate(&ckpt, &ds, &store, &idx, *threshold)?;
            let mut v = serde_json::to_value(&report).map_err(|e| Error::Data(e.to_string()))?;
            v["split"] = json!(split.name());
            v["dataset_digest"] = json!(ds.digest());
            v["checkpoint_digest"] = json!(ckpt.digest());
            v["config"] = json!(ckpt.config.to_text());
            emit(out.as_deref(), &v)?;
        }
        Command::Transfer {
            source,
            target,
            fraction,
            out,
        } => {
            let cfg = config(cli)?;
            let src = load_benchmark(source)?;
            let tgt = load_benchmark(target)?;
            let report = transfer_protocol(&src, &tgt, *fraction, &cfg)?;
            let mut v = serde_json::to_value(&report).map_err(|e| Error::Data(e.to_string()))?;
            v["source_digest"] = json!(src.digest());
            v["target_digest"] = json!(tgt.digest());
            v["config"] = json!(cfg.to_text());
            emit(out.as_deref(), &v)?;
        }
        Command::Synth {
            seed,
            problems,
            variants,
            negative_ratio,
            out,
        } => {
            let synth = SynthConfig {
                negative_ratio: *negative_ratio,
                ..SynthConfig::new(*seed, *problems, *variants)
            };
            let bench = generate_synthetic(&synth)?;
            bench.write(out)?;
            emit(
                None,
                &json!({
                    "functions": bench.functions.len(),
                    "train": bench.train.len(),
                    "validation": bench.validation.len(),
                    "test": bench.test.len(),
                    "digest": bench.digest(),
                }),
            )?;
        }
        Command::Gradcheck { probes, seed, out } => {
            let mut results = Vec::new();
            let mut worst = 0.0f64;
            for loss in [Loss::Margin, Loss::Bce] {
                let mut gc = toy_config(loss);
                gc.probes = *probes;
                gc.seed = *seed;
                let r = grad_check(&gc)?;
                worst = worst.max(r.max_rel_error);
                let groups: std::collections::BTreeSet<&str> = r.probes.iter().map(|p| p.tensor.as_str()).collect();
                results.push(json!({
                    "loss": loss.name(),
                    "value": r.loss,
                    "probes": r.probes.len(),
                    "tensors": groups.len(),
                    "max_rel_error": r.max_rel_error,
                }));
            }
            println!("max relative error: {worst:.3e}");
            emit(
                out.as_deref(),
                &json!({ "tolerance": GRADCHECK_TOLERANCE, "checks": results }),
            )?;
            if worst.is_nan() || worst >= GRADCHECK_TOLERANCE {
                eprintln!("error: gradient check failed ({worst:.3e} >= {GRADCHECK_TOLERANCE:e})");
                return Ok(EXIT_NUMERICAL);
            }
        }
    }
    Ok(EXIT_OK)
}
