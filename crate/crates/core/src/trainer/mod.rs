//! Pair training with margin or logistic loss, checkpoints and gradient checks.

mod adam;
mod checkpoint;
mod gradcheck;
mod loss;
mod objective;

pub use adam::Adam;
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, toy_config, GradCheckConfig, GradCheckReport, Probe};
pub use loss::{as_distance, bce_loss, margin_loss, Loss, P_CLAMP};
pub use objective::{pair_loss, Objective, PairLoss};

use log::{error, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::Config;
use crate::corpus::{FunctionStore, NGramIndex};
use crate::embeddings::{EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{calibrate_threshold, ClonePair};
use crate::model::{Model, ParamSet};
use crate::pipeline::{score_pairs, MsaCache};

/// Pairs per unit of parallel work. Gradients are summed per chunk and then
/// across chunks in batch order, so results do not depend on the thread count.
pub const CHUNK: usize = 4;

/// Labeled pairs plus the retrieval corpus their MSAs are built from.
#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub functions: &'a FunctionStore,
    pub train: &'a [ClonePair],
    /// Used only for threshold calibration; may be empty.
    pub validation: &'a [ClonePair],
    pub corpus: &'a FunctionStore,
    pub index: &'a NGramIndex,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: u64,
    pub pairs_seen: usize,
    /// Mean loss of each epoch.
    pub epoch_loss: Vec<f64>,
    /// Validation F1 at the calibrated threshold.
    pub validation_f1: Option<f64>,
}

impl Config {
    pub fn objective(&self) -> Objective {
        Objective {
            loss: self.loss,
            measure: self.measure,
            symmetrize: self.symmetrize,
            gamma: self.gamma,
        }
    }
}

/// Trains a fresh model. Token vectors start from `embed` when given.
pub fn train(
    inputs: &TrainInputs,
    vocab: &Vocabulary,
    embed: Option<&EmbeddingTable>,
    cfg: &Config,
) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    let mut model = Model::<f32>::new(cfg.model(vocab.len()), cfg.seed)?;
    if let Some(table) = embed {
        if table.vocab != *vocab {
            return Err(Error::Config(
                "embedding vocabulary differs from the training vocabulary".into(),
            ));
        }
        model.load_embeddings(table)?;
    }
    let ckpt = Checkpoint {
        model,
        vocab: vocab.clone(),
        config: cfg.clone(),
        tau: cfg.tau,
        provenance: provenance(inputs, vocab, embed),
    };
    fine_tune(ckpt, inputs, cfg)
}

/// Continues training a checkpoint on new pairs and recalibrates its threshold.
///
/// The checkpoint's vocabulary and shape are kept; `cfg` supplies the
/// optimization settings.
pub fn fine_tune(mut ckpt: Checkpoint, inputs: &TrainInputs, cfg: &Config) -> Result<(Checkpoint, TrainReport)> {
    let mut run = ckpt.config.clone();
    for key in ["gamma", "lr", "epochs", "batch_size", "seed", "freeze_embeddings"] {
        run.set(key, &cfg.get(key).expect("known key"))?;
    }
    let mut cache = MsaCache::new(run.r, run.l, inputs.index);
    let ids = inputs
        .train
        .iter()
        .chain(inputs.validation)
        .flat_map(|p| [p.id1.as_str(), p.id2.as_str()]);
    cache.extend(ids, inputs.functions, inputs.corpus, inputs.index, &ckpt.vocab)?;
    info!("built {} MSAs (R={}, L={})", cache.len(), run.r, run.l);

    let mut report = fit(&mut ckpt.model, &cache, inputs.train, &run)?;
    ckpt.config = run;
    if has_both_labels(inputs.validation) {
        let pairs: Vec<(&str, &str)> = inputs
            .validation
            .iter()
            .map(|p| (p.id1.as_str(), p.id2.as_str()))
            .collect();
        let scores = score_pairs(&ckpt.model, &cache, &pairs, &ckpt.config.similarity())?;
        let labels: Vec<i8> = inputs.validation.iter().map(|p| p.label).collect();
        let (tau, f1) = calibrate_threshold(&scores, &labels);
        info!("calibrated tau = {tau:.6} (validation F1 {f1:.4})");
        ckpt.tau = tau;
        report.validation_f1 = Some(f1);
    } else {
        ckpt.tau = ckpt.config.tau;
    }
    Ok((ckpt, report))
}

fn has_both_labels(pairs: &[ClonePair]) -> bool {
    pairs.iter().any(|p| p.label > 0) && pairs.iter().any(|p| p.label < 0)
}

fn provenance(inputs: &TrainInputs, vocab: &Vocabulary, embed: Option<&EmbeddingTable>) -> String {
    format!(
        "functions={}\ncorpus={}\nindex={}\nvocab={}\nembeddings={}\n",
        inputs.functions.digest(),
        inputs.corpus.digest(),
        inputs.index.digest(),
        vocab.digest(),
        if embed.is_some() { "pretrained" } else { "random" },
    )
}

/// `n` indices drawn from `idx` by repeated shuffled passes.
fn resample(idx: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut pass = idx.to_vec();
        pass.shuffle(rng);
        out.extend(pass.into_iter().take(n - out.len()));
    }
    out
}

/// One epoch's pair order: positives and negatives alternate, the minority class resampled.
pub fn balanced_order(pairs: &[ClonePair], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let pos: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label > 0).collect();
    let neg: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label < 0).collect();
    let n = pos.len().max(neg.len());
    let (p, q) = (resample(&pos, n, rng), resample(&neg, n, rng));
    p.into_iter().zip(q).flat_map(|(a, b)| [a, b]).collect()
}

/// Runs the optimizer over `pairs` for `cfg.epochs` epochs.
pub fn fit(model: &mut Model<f32>, cache: &MsaCache, pairs: &[ClonePair], cfg: &Config) -> Result<TrainReport> {
    let mut report = TrainReport::default();
    if cfg.epochs == 0 || pairs.is_empty() {
        return Ok(report);
    }
    if !has_both_labels(pairs) {
        return Err(Error::Data(
            "training needs at least one positive and one negative pair".into(),
        ));
    }
    let obj = cfg.objective();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);
    let mut opt = Adam::new(&model.params, cfg.lr);
    let mut frozen = vec![false; model.params.len()];
    frozen[model.slots.token] = cfg.freeze_embeddings;
    for epoch in 0..cfg.epochs {
        let order = balanced_order(pairs, &mut rng);
        let (mut total, mut seen) = (0.0f64, 0usize);
        let batches = order.chunks(cfg.batch_size).count();
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (grads, losses) = batch_gradient(model, cache, pairs, batch, &obj)
                .inspect_err(|e| dump_batch(epoch, b, batch, pairs, &e.to_string()))?;
            let sum: f64 = losses.iter().sum();
            if !sum.is_finite() || !grads.all_finite() {
                let msg = format!("epoch {epoch} batch {b}: non-finite loss or gradient (losses {losses:?})");
                dump_batch(epoch, b, batch, pairs, &msg);
                return Err(Error::Numerical(msg));
            }
            opt.step(&mut model.params, &grads, &frozen);
            total += sum;
            seen += batch.len();
            if b % 25 == 0 || b + 1 == batches {
                info!(
                    "epoch {epoch} batch {}/{batches}: mean loss {:.5}",
                    b + 1,
                    total / seen as f64
                );
            }
        }
        report.epoch_loss.push(total / seen as f64);
        report.pairs_seen += seen;
    }
    report.steps = opt.steps();
    Ok(report)
}

/// Mean gradient and per-pair losses of one batch.
pub fn batch_gradient(
    model: &Model<f32>,
    cache: &MsaCache,
    pairs: &[ClonePair],
    batch: &[usize],
    obj: &Objective,
) -> Result<(ParamSet<f32>, Vec<f64>)> {
    let chunks: Vec<Result<(ParamSet<f32>, Vec<f64>)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = model.params.zeros_like();
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let p = &pairs[i];
                let out = pair_loss(
                    model,
                    cache.get(&p.id1)?,
                    cache.get(&p.id2)?,
                    p.label,
                    obj,
                    Some(&mut g),
                )
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("pair ({}, {}): {m}", p.id1, p.id2)),
                    other => other,
                })?;
                losses.push(out.loss as f64);
            }
            Ok((g, losses))
        })
        .collect();
    let mut grads: Option<ParamSet<f32>> = None;
    let mut losses = Vec::with_capacity(batch.len());
    for c in chunks {
        let (g, l) = c?;
        match grads.as_mut() {
            Some(acc) => acc.add_assign(&g),
            None => grads = Some(g),
        }
        losses.extend(l);
    }
    let mut grads = grads.unwrap_or_else(|| model.params.zeros_like());
    grads.scale(1.0 / batch.len().max(1) as f32);
    Ok((grads, losses))
}

fn dump_batch(epoch: usize, b: usize, batch: &[usize], pairs: &[ClonePair], why: &str) {
    error!("training aborted at epoch {epoch}, batch {b}: {why}");
    for &i in batch {
        let p = &pairs[i];
        error!("  pair {i}: {} {} label {}", p.id1, p.id2, p.label);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_order_resamples_minority() {
        let mk = |l: i8| ClonePair {
            id1: "a".into(),
            id2: "b".into(),
            label: l,
            clone_type: None,
        };
        let pairs = vec![mk(1), mk(-1), mk(-1), mk(-1), mk(-1)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let order = balanced_order(&pairs, &mut rng);
        assert_eq!(order.len(), 8);
        for w in order.chunks(2) {
            assert_eq!((pairs[w[0]].label, pairs[w[1]].label), (1, -1));
        }
        let mut negs: Vec<usize> = order.iter().copied().filter(|&i| i > 0).collect();
        negs.sort();
        assert_eq!(negs, vec![1, 2, 3, 4]);
    }
}
