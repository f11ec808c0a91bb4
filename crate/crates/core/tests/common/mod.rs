#![allow(dead_code)]

use std::collections::HashMap;

use alphacc::corpus::{CodeMsa, MsaCell};
use alphacc::embeddings::Vocabulary;
use alphacc::lexer::{Token, TokenType};
use alphacc::model::{EnhancerMode, Model, ModelConfig, PackedMsa};
use rand::Rng;

pub fn vocab(size: usize) -> Vocabulary {
    let counts: HashMap<String, u64> = (0..size - 2).map(|i| (format!("w{i}"), 1000 - i as u64)).collect();
    Vocabulary::from_counts(counts, 1)
}

/// Small double-precision encoder.
pub fn model(vocab_size: usize, d: usize, l: usize, seed: u64) -> Model<f64> {
    let cfg = ModelConfig {
        vocab_size,
        d,
        l,
        heads: 2,
        blocks: 2,
        d_ff: 2 * d,
        mode: EnhancerMode::Full,
    };
    Model::new(cfg, seed).unwrap()
}

/// Random MSA with ragged rows; every row has at least one valid cell.
pub fn random_msa<R: Rng>(rng: &mut R, vocab: &Vocabulary, r: usize, l: usize) -> CodeMsa {
    let rows = (0..r)
        .map(|_| {
            let len = rng.random_range(1..=l);
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
    CodeMsa {
        rows,
        row_ids: (0..r).map(|i| format!("f{i}")).collect(),
    }
}

pub fn pack(msa: &CodeMsa, vocab: &Vocabulary) -> PackedMsa {
    PackedMsa::from_msa(msa, vocab)
}

/// Reference FNV-1a over token texts joined by 0x1f, folded into `buckets`.
pub fn hashed_ngrams(tokens: &[Token], n: usize, buckets: u64) -> HashMap<u64, u64> {
    let mut out = HashMap::new();
    if tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        let joined: Vec<u8> = w
            .iter()
            .map(|t| t.text.as_bytes().to_vec())
            .collect::<Vec<_>>()
            .join(&0x1f_u8);
        let mut h: u64 = 0xcbf29ce484222325;
        for b in joined {
            h = (h ^ b as u64).wrapping_mul(0x100000001b3);
        }
        *out.entry(h % buckets).or_insert(0) += 1;
    }
    out
}

pub fn cosine_counts(a: &HashMap<u64, u64>, b: &HashMap<u64, u64>) -> f64 {
    let dot: u64 = a.iter().map(|(k, v)| v * b.get(k).copied().unwrap_or(0)).sum();
    let na = (a.values().map(|v| v * v).sum::<u64>() as f64).sqrt();
    let nb = (b.values().map(|v| v * v).sum::<u64>() as f64).sqrt();
    if dot == 0 || na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot as f64 / (na * nb)).min(1.0)
}
