use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::Loss;
use super::objective::{pair_loss, Objective};
use crate::corpus::{CodeMsa, MsaCell};
use crate::embeddings::Vocabulary;
use crate::error::Result;
use crate::lexer::{Token, TokenType};
use crate::model::{EnhancerMode, Model, ModelConfig, PackedMsa};
use crate::scorer::Measure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub model: ModelConfig,
    pub depth: usize,
    pub objective: Objective,
    pub label: i8,
    pub probes: usize,
    pub step: f64,
    pub seed: u64,
}

/// The small model used for finite-difference checks.
pub fn toy_config(loss: Loss) -> GradCheckConfig {
    GradCheckConfig {
        model: ModelConfig {
            vocab_size: 2 + 14,
            d: 8,
            l: 12,
            heads: 2,
            blocks: 1,
            d_ff: 16,
            mode: EnhancerMode::Full,
        },
        depth: 3,
        objective: Objective {
            loss,
            measure: Measure::LateInteraction,
            symmetrize: true,
            // Large enough that the hinge is active for any distance.
            gamma: 2.5,
        },
        label: 1,
        probes: 64,
        step: 1e-5,
        seed: 11,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub loss: f64,
    pub max_rel_error: f64,
    pub probes: Vec<Probe>,
}

fn rel_error(a: f64, f: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(1e-8)
}

/// A random MSA with ragged rows over the toy vocabulary.
fn random_msa(rng: &mut ChaCha8Rng, vocab: &Vocabulary, r: usize, l: usize) -> PackedMsa {
    let rows = (0..r)
        .map(|_| {
            let len = rng.random_range(l / 3..=l);
            (0..l)
                .map(|c| {
                    if c < len {
                        let id = rng.random_range(2..vocab.len());
                        let ty = TokenType::ALL[rng.random_range(0..TokenType::COUNT)];
                        MsaCell {
                            token: Token::new(vocab.token(id), ty),
                            valid: true,
                        }
                    } else {
                        MsaCell::pad()
                    }
                })
                .collect()
        })
        .collect();
    let msa = CodeMsa {
        rows,
        row_ids: (0..r).map(|i| format!("row{i}")).collect(),
    };
    PackedMsa::from_msa(&msa, vocab)
}

fn toy_vocab(size: usize) -> Vocabulary {
    let counts: HashMap<String, u64> = (0..size - 2).map(|i| (format!("tok{i}"), (100 - i) as u64)).collect();
    Vocabulary::from_counts(counts, 1)
}

/// Compares analytic gradients with central differences on sampled parameters.
///
/// Every tensor gets at least one probe; within a tensor the entry with the
/// largest analytic gradient among a few random candidates is preferred, so
/// probes land on parameters that actually influence the loss.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let vocab = toy_vocab(cfg.model.vocab_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::<f64>::new(cfg.model, cfg.seed)?;
    let a = random_msa(&mut rng, &vocab, cfg.depth, cfg.model.l);
    let b = random_msa(&mut rng, &vocab, cfg.depth, cfg.model.l);
    check_pair(&model, &a, &b, cfg, &mut rng)
}

pub(crate) fn check_pair(
    model: &Model<f64>,
    a: &PackedMsa,
    b: &PackedMsa,
    cfg: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheckReport> {
    let obj = &cfg.objective;
    let mut grads = model.params.zeros_like();
    let base = pair_loss(model, a, b, cfg.label, obj, Some(&mut grads))?;
    let n_tensors = model.params.len();
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for p in 0..cfg.probes.max(n_tensors) {
        let t = if p < n_tensors {
            p
        } else {
            rng.random_range(0..n_tensors)
        };
        let g = &grads.tensors[t].data;
        let best = (0..16)
            .map(|_| rng.random_range(0..g.len()))
            .max_by(|&i, &j| g[i].abs().total_cmp(&g[j].abs()))
            .expect("non-empty");
        picks.push((t, best));
    }
    let mut probes = Vec::with_capacity(picks.len());
    let mut work = model.clone();
    for (t, i) in picks {
        let orig = work.params.tensors[t].data[i];
        work.params.tensors[t].data[i] = orig + cfg.step;
        let up = pair_loss(&work, a, b, cfg.label, obj, None)?.loss;
        work.params.tensors[t].data[i] = orig - cfg.step;
        let down = pair_loss(&work, a, b, cfg.label, obj, None)?.loss;
        work.params.tensors[t].data[i] = orig;
        let numeric = (up - down) / (2.0 * cfg.step);
        let analytic = grads.tensors[t].data[i];
        probes.push(Probe {
            tensor: model.params.tensors[t].name.clone(),
            index: i,
            analytic,
            numeric,
            rel_error: rel_error(analytic, numeric),
        });
    }
    let max_rel_error = probes.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        loss: base.loss,
        max_rel_error,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_and_bce_pass() {
        for loss in [Loss::Margin, Loss::Bce] {
            let r = grad_check(&toy_config(loss)).unwrap();
            assert!(r.loss > 0.0);
            assert!(r.max_rel_error < 1e-4, "{loss}: {}", r.max_rel_error);
            assert!(r.probes.len() >= 64);
        }
    }

    #[test]
    fn other_measures_and_modes() {
        for (measure, mode, sym) in [
            (Measure::Cosine, EnhancerMode::Full, true),
            (Measure::Euclidean, EnhancerMode::AttentionOnly, true),
            (Measure::LateInteraction, EnhancerMode::Off, false),
        ] {
            let mut cfg = toy_config(Loss::Margin);
            cfg.objective.measure = measure;
            cfg.objective.symmetrize = sym;
            cfg.model.mode = mode;
            cfg.label = -1;
            let r = grad_check(&cfg).unwrap();
            assert!(r.max_rel_error < 1e-4, "{measure} {mode}: {}", r.max_rel_error);
        }
    }

    #[test]
    fn flat_hinge_gives_zero_gradients() {
        let cfg = GradCheckConfig {
            objective: Objective {
                gamma: 0.5,
                ..toy_config(Loss::Margin).objective
            },
            ..toy_config(Loss::Margin)
        };
        let vocab = toy_vocab(cfg.model.vocab_size);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model::<f64>::new(cfg.model, 3).unwrap();
        let a = random_msa(&mut rng, &vocab, 3, 12);
        let r = check_pair(&model, &a, &a, &cfg, &mut rng).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.probes.iter().all(|p| p.analytic == 0.0 && p.numeric == 0.0));
        assert_eq!(r.max_rel_error, 0.0);
    }
}
