//! Datasets, metrics, threshold calibration, the synthetic benchmark and transfer runs.

mod dataset;
mod metrics;
mod synth;
mod templates;

pub use dataset::{
    load_benchmark, load_dataset, read_pairs, Benchmark, ClonePair, ClonePairDataset, CloneType, Split, FUNCTIONS_FILE,
};
pub use metrics::{
    calibrate_exhaustive, calibrate_threshold, candidate_thresholds, classify_all, compute_metrics, Confusion, Metrics,
    SENTINEL_GAP,
};
pub use synth::{generate_synthetic, type_histogram, SynthConfig};
pub use templates::{Template, TEMPLATES};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::corpus::{FunctionStore, NGramIndex};
use crate::embeddings::{build_vocab_multi, Vocabulary};
use crate::error::{Error, Result};
use crate::pipeline::{score_pairs, MsaCache};
use crate::scorer::Score;
use crate::trainer::{fine_tune, train, Checkpoint, TrainInputs};

/// Metrics plus the context needed to read them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_type: std::collections::BTreeMap<String, f64>,
    pub confusion: Confusion,
    pub n_pairs: usize,
    pub tau: f64,
}

impl EvalReport {
    pub fn new(m: Metrics, n_pairs: usize, tau: f64) -> Self {
        EvalReport {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            per_type: m.per_type,
            confusion: m.confusion,
            n_pairs,
            tau,
        }
    }
}

/// Scores `pairs` with a checkpoint, building MSAs against `corpus`/`index`.
pub fn score_dataset(
    ckpt: &Checkpoint,
    functions: &FunctionStore,
    pairs: &[ClonePair],
    corpus: &FunctionStore,
    index: &NGramIndex,
) -> Result<Vec<Score>> {
    let c = &ckpt.config;
    let mut cache = MsaCache::new(c.r, c.l, index);
    cache.extend(
        pairs.iter().flat_map(|p| [p.id1.as_str(), p.id2.as_str()]),
        functions,
        corpus,
        index,
        &ckpt.vocab,
    )?;
    let ids: Vec<(&str, &str)> = pairs.iter().map(|p| (p.id1.as_str(), p.id2.as_str())).collect();
    score_pairs(&ckpt.model, &cache, &ids, &ckpt.similarity())
}

/// Classifies every pair at `tau` (default: the checkpoint's) and computes metrics.
pub fn evaluate(
    ckpt: &Checkpoint,
    dataset: &ClonePairDataset,
    corpus: &FunctionStore,
    index: &NGramIndex,
    tau: Option<f64>,
) -> Result<EvalReport> {
    if dataset.functions.language() != corpus.language() {
        return Err(Error::Config("dataset and corpus languages differ".into()));
    }
    let tau = tau.unwrap_or(ckpt.tau);
    let scores = score_dataset(ckpt, &dataset.functions, &dataset.pairs, corpus, index)?;
    let m = compute_metrics(&dataset.pairs, &classify_all(&scores, tau));
    Ok(EvalReport::new(m, dataset.pairs.len(), tau))
}

/// Scores a validation split and returns the F1-optimal threshold.
pub fn calibrate_on(
    ckpt: &Checkpoint,
    validation: &ClonePairDataset,
    corpus: &FunctionStore,
    index: &NGramIndex,
) -> Result<f64> {
    let scores = score_dataset(ckpt, &validation.functions, &validation.pairs, corpus, index)?;
    let labels: Vec<i8> = validation.pairs.iter().map(|p| p.label).collect();
    Ok(calibrate_threshold(&scores, &labels).0)
}

/// Source-trained model adapted to a target benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferReport {
    pub fraction: f64,
    pub fine_tune_pairs: usize,
    pub target: EvalReport,
}

/// Trains on the source, fine-tunes on a seeded `fraction` of target train
/// pairs, recalibrates on target validation and evaluates on target test.
///
/// Each benchmark retrieves from its own functions. The source vocabulary is
/// kept, so target tokens it lacks map to the unknown token.
pub fn transfer_protocol(
    source: &Benchmark,
    target: &Benchmark,
    fraction: f64,
    cfg: &Config,
) -> Result<TransferReport> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    let src_index = NGramIndex::build(&source.functions, cfg.ngram, cfg.buckets);
    let vocab: Vocabulary = build_vocab_multi(&[&source.functions], cfg.embed_min_count);
    let src_inputs = TrainInputs {
        functions: &source.functions,
        train: &source.train,
        validation: &source.validation,
        corpus: &source.functions,
        index: &src_index,
    };
    let (mut ckpt, _) = train(&src_inputs, &vocab, None, cfg)?;

    let mut sample = target.train.clone();
    sample.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_616e));
    sample.truncate((fraction * target.train.len() as f64).round() as usize);
    let tgt_index = NGramIndex::build(&target.functions, cfg.ngram, cfg.buckets);
    let tgt_inputs = TrainInputs {
        functions: &target.functions,
        train: &sample,
        validation: &target.validation,
        corpus: &target.functions,
        index: &tgt_index,
    };
    let fits = sample.iter().any(|p| p.label > 0) && sample.iter().any(|p| p.label < 0);
    if fits {
        ckpt = fine_tune(ckpt, &tgt_inputs, cfg)?.0;
    } else if !target.validation.is_empty() {
        ckpt.tau = calibrate_on(&ckpt, &target.dataset(Split::Validation), &target.functions, &tgt_index)?;
    }
    info!(
        "transfer: fine-tuned on {} target pairs, tau {:.6}",
        if fits { sample.len() } else { 0 },
        ckpt.tau
    );
    let report = evaluate(&ckpt, &target.dataset(Split::Test), &target.functions, &tgt_index, None)?;
    Ok(TransferReport {
        fraction,
        fine_tune_pairs: if fits { sample.len() } else { 0 },
        target: report,
    })
}

/// Everything produced by one train-and-test run on a benchmark.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub checkpoint: Checkpoint,
    pub train: crate::trainer::TrainReport,
    pub test: EvalReport,
    pub test_scores: Vec<Score>,
    pub index: NGramIndex,
}

/// Indexes the benchmark's functions, pretrains token embeddings on them
/// (unless `embed.epochs = 0`), trains on the train split, calibrates on
/// validation and evaluates on test.
pub fn run_benchmark(bench: &Benchmark, cfg: &Config) -> Result<Experiment> {
    cfg.validate()?;
    let index = NGramIndex::build(&bench.functions, cfg.ngram, cfg.buckets);
    let vocab = build_vocab_multi(&[&bench.functions], cfg.embed_min_count);
    let table = if cfg.embed_epochs > 0 {
        Some(crate::embeddings::train_embeddings(
            &[&bench.functions],
            &vocab,
            &cfg.sgns(),
        )?)
    } else {
        None
    };
    let inputs = TrainInputs {
        functions: &bench.functions,
        train: &bench.train,
        validation: &bench.validation,
        corpus: &bench.functions,
        index: &index,
    };
    let (checkpoint, train_report) = train(&inputs, &vocab, table.as_ref(), cfg)?;
    let test_scores = score_dataset(&checkpoint, &bench.functions, &bench.test, &bench.functions, &index)?;
    let m = compute_metrics(&bench.test, &classify_all(&test_scores, checkpoint.tau));
    let test = EvalReport::new(m, bench.test.len(), checkpoint.tau);
    Ok(Experiment {
        checkpoint,
        train: train_report,
        test,
        test_scores,
        index,
    })
}
