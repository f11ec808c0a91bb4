//! Token vocabulary and skip-gram token embeddings.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::info;
use num_traits::Float;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{hex, FunctionStore, PAD_TEXT};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const UNK_TEXT: &str = "<unk>";

const MAGIC: &[u8; 4] = b"ACCE";
const VERSION: u32 = 1;

/// Dense token ids: 0 is padding, 1 is unknown, the rest by descending frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(text, count)` pairs; ordering is by count, then text.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Vocabulary {
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && t != PAD_TEXT && t != UNK_TEXT)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![PAD_TEXT.to_string(), UNK_TEXT.to_string()];
        tokens.extend(kept.into_iter().map(|k| k.0));
        Self::from_tokens(tokens).expect("reserved tokens are in place")
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD_TEXT || tokens[UNK_ID] != UNK_TEXT {
            return Err(Error::Format("vocabulary must start with <pad>, <unk>".into()));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of `text`, or the unknown id.
    pub fn id(&self, text: &str) -> usize {
        self.ids.get(text).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, text: &str) -> Option<usize> {
        self.ids.get(text).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update((t.len() as u32).to_le_bytes());
            h.update(t.as_bytes());
        }
        hex(&h.finalize())
    }
}

fn token_counts(stores: &[&FunctionStore]) -> HashMap<String, u64> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for store in stores {
        for f in store.iter() {
            for t in &f.tokens {
                *counts.entry(t.text.clone()).or_default() += 1;
            }
        }
    }
    counts
}

pub fn build_vocab(store: &FunctionStore, min_count: u64) -> Vocabulary {
    build_vocab_multi(&[store], min_count)
}

/// Vocabulary over the union of several stores.
pub fn build_vocab_multi(stores: &[&FunctionStore], min_count: u64) -> Vocabulary {
    Vocabulary::from_counts(token_counts(stores), min_count)
}

/// V×d matrix of token vectors; row 0 (padding) is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Vector of `text`; unknown text gets the unknown row.
    pub fn lookup(&self, text: &str) -> &[f32] {
        self.row(self.vocab.id(text))
    }

    pub fn to_bytes(&self, provenance: &str) -> Vec<u8> {
        let mut w = ByteWriter::new(MAGIC, VERSION);
        w.u32(self.vocab.len() as u32);
        w.u32(self.dim as u32);
        for t in self.vocab.tokens() {
            w.str(t);
        }
        w.f32s(&self.data);
        w.str(provenance);
        w.finish()
    }

    /// Decodes a table and its provenance text.
    pub fn from_bytes(bytes: &[u8]) -> Result<(EmbeddingTable, String)> {
        let mut r = ByteReader::new(bytes, MAGIC, VERSION)?;
        let v = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::Format("embedding dimension is zero".into()));
        }
        let mut tokens = Vec::with_capacity(v.min(1 << 20));
        for _ in 0..v {
            tokens.push(r.str()?);
        }
        let vocab = Vocabulary::from_tokens(tokens)?;
        let data = r.f32s(v * dim)?;
        let provenance = r.str()?;
        r.end()?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite embedding entry".into()));
        }
        Ok((EmbeddingTable { vocab, dim, data }, provenance))
    }

    pub fn save(&self, path: &Path, provenance: &str) -> Result<()> {
        fs::write(path, self.to_bytes(provenance)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 256,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            seed: 0,
        }
    }
}

fn sigmoid<T: Float>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Gradients of one skip-gram term.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad<T> {
    pub loss: T,
    pub center: Vec<T>,
    pub context: Vec<T>,
    pub negatives: Vec<Vec<T>>,
}

/// Loss `-log σ(u_o·v) - Σ_k log σ(-u_k·v)` and its gradients.
pub fn sgns_loss_grad<T: Float>(center: &[T], context: &[T], negatives: &[&[T]]) -> SgnsGrad<T> {
    let s = sigmoid(dot(context, center));
    let mut loss = -s.ln();
    let gpos = s - T::one();
    let mut g_center: Vec<T> = context.iter().map(|&u| gpos * u).collect();
    let g_context = center.iter().map(|&v| gpos * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for u in negatives {
        let sk = sigmoid(dot(u, center));
        loss = loss - (T::one() - sk).ln();
        for (g, &x) in g_center.iter_mut().zip(u.iter()) {
            *g = *g + sk * x;
        }
        g_negs.push(center.iter().map(|&v| sk * v).collect());
    }
    SgnsGrad {
        loss,
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

/// Seeded input-vector initialization: uniform in ±0.5/d, padding row zero.
pub fn initial_table(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 0.5 / dim as f32;
    let mut data: Vec<f32> = (0..vocab.len() * dim)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    data[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
    EmbeddingTable {
        vocab: vocab.clone(),
        dim,
        data,
    }
}

/// Trains skip-gram embeddings with negative sampling over the function tokens of `stores`.
///
/// Single threaded and fully determined by the corpus, vocabulary and config.
pub fn train_embeddings(stores: &[&FunctionStore], vocab: &Vocabulary, cfg: &SgnsConfig) -> Result<EmbeddingTable> {
    if vocab.len() < 2 {
        return Err(Error::Data("vocabulary needs at least two entries".into()));
    }
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(Error::Config("embedding dim and window must be positive".into()));
    }
    let d = cfg.dim;
    let mut table = initial_table(vocab, d, cfg.seed);
    let sentences: Vec<Vec<usize>> = stores
        .iter()
        .flat_map(|s| s.iter())
        .map(|f| f.tokens.iter().map(|t| vocab.id(&t.text)).collect())
        .collect();
    let total: usize = sentences.iter().map(Vec::len).sum::<usize>() * cfg.epochs;
    if total == 0 {
        return Ok(table);
    }
    let mut freq = vec![0f64; vocab.len()];
    for s in &sentences {
        for &id in s {
            freq[id] += 1.0;
        }
    }
    let weights: Vec<f64> = freq.iter().map(|f| f.powf(0.75)).collect();
    let noise =
        WeightedIndex::new(&weights).map_err(|e| Error::Data(format!("cannot build noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5deece66d);
    let mut out = vec![0f32; vocab.len() * d];
    let mut neg_ids = Vec::with_capacity(cfg.negatives);
    let mut seen = 0usize;
    let mut loss_sum = 0f64;
    let mut loss_n = 0usize;
    for epoch in 0..cfg.epochs {
        for s in &sentences {
            for (pos, &c) in s.iter().enumerate() {
                let progress = seen as f64 / total as f64;
                let lr = (cfg.lr_start - (cfg.lr_start - cfg.lr_end) * progress) as f32;
                seen += 1;
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(s.len());
                for (opos, &o) in s.iter().enumerate().take(hi).skip(lo) {
                    if opos == pos {
                        continue;
                    }
                    neg_ids.clear();
                    while neg_ids.len() < cfg.negatives {
                        let k = noise.sample(&mut rng);
                        if k != o {
                            neg_ids.push(k);
                        }
                    }
                    let g = {
                        let negs: Vec<&[f32]> = neg_ids.iter().map(|&k| &out[k * d..(k + 1) * d]).collect();
                        sgns_loss_grad(&table.data[c * d..(c + 1) * d], &out[o * d..(o + 1) * d], &negs)
                    };
                    loss_sum += g.loss as f64;
                    loss_n += 1;
                    for (x, gx) in out[o * d..(o + 1) * d].iter_mut().zip(&g.context) {
                        *x -= lr * gx;
                    }
                    for (&k, gk) in neg_ids.iter().zip(&g.negatives) {
                        for (x, gx) in out[k * d..(k + 1) * d].iter_mut().zip(gk) {
                            *x -= lr * gx;
                        }
                    }
                    if c != PAD_ID {
                        for (x, gx) in table.data[c * d..(c + 1) * d].iter_mut().zip(&g.center) {
                            *x -= lr * gx;
                        }
                    }
                }
            }
        }
        info!(
            "embeddings epoch {}: mean loss {:.4}",
            epoch + 1,
            loss_sum / loss_n.max(1) as f64
        );
        loss_sum = 0.0;
        loss_n = 0;
    }
    if table.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("embedding training diverged".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::StoredFunction;
    use crate::lexer::{Language, Token, TokenType};

    fn store(sentences: &[&[&str]]) -> FunctionStore {
        let mut s = FunctionStore::new(Language::JavaLike);
        for (i, words) in sentences.iter().enumerate() {
            s.insert(StoredFunction {
                id: format!("f{i:04}"),
                file_path: format!("f{i}.java"),
                tokens: words.iter().map(|w| Token::new(*w, TokenType::Identifier)).collect(),
                context_before: vec![],
                context_after: vec![],
            })
            .unwrap();
        }
        s
    }

    #[test]
    fn vocabulary_order_and_threshold() {
        let s = store(&[&["a", "b", "a"], &["a"]]);
        let v = build_vocab(&s, 1);
        assert_eq!((v.id("a"), v.id("b")), (2, 3));
        assert_eq!(v.id(PAD_TEXT), PAD_ID);
        let v2 = build_vocab(&s, 2);
        assert_eq!(v2.id("a"), 2);
        assert_eq!(v2.id("b"), UNK_ID);
        assert_eq!(build_vocab(&s, 1), v);
    }

    #[test]
    fn zero_epochs_is_initialization() {
        let s = store(&[&["a", "b", "c"]]);
        let v = build_vocab(&s, 1);
        let cfg = SgnsConfig {
            dim: 8,
            epochs: 0,
            seed: 3,
            ..SgnsConfig::default()
        };
        let t = train_embeddings(&[&s], &v, &cfg).unwrap();
        assert_eq!(t, initial_table(&v, 8, 3));
        assert!(t.row(PAD_ID).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lookup_contract() {
        let s = store(&[&["a", "b", "a"]]);
        let v = build_vocab(&s, 1);
        let t = initial_table(&v, 4, 1);
        assert_eq!(t.lookup(PAD_TEXT), &[0.0; 4]);
        assert_eq!(t.lookup("never seen"), t.row(UNK_ID));
        assert_eq!(t.lookup("b"), t.row(3));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 6;
        let mut params: Vec<f64> = (0..d * 5).map(|_| rng.random_range(-0.8..0.8)).collect();
        let loss = |p: &[f64]| {
            let negs: Vec<&[f64]> = (2..5).map(|k| &p[k * d..(k + 1) * d]).collect();
            sgns_loss_grad(&p[..d], &p[d..2 * d], &negs).loss
        };
        let g = {
            let negs: Vec<&[f64]> = (2..5).map(|k| &params[k * d..(k + 1) * d]).collect();
            sgns_loss_grad(&params[..d], &params[d..2 * d], &negs)
        };
        let mut analytic = g.center.clone();
        analytic.extend(&g.context);
        for n in &g.negatives {
            analytic.extend(n);
        }
        let h = 1e-5;
        for i in 0..params.len() {
            let x = params[i];
            params[i] = x + h;
            let up = loss(&params);
            params[i] = x - h;
            let down = loss(&params);
            params[i] = x;
            let fd = (up - down) / (2.0 * h);
            let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: analytic {} fd {fd}", analytic[i]);
        }
    }

    #[test]
    fn cooccurring_tokens_end_up_closer() {
        let mut sentences: Vec<Vec<&str>> = Vec::new();
        for i in 0..60 {
            let fill = ["p", "q", "r", "s", "t", "u"];
            sentences.push(vec!["x", "y", fill[i % 6], "x", "y", fill[(i + 1) % 6], "x", "y"]);
            sentences.push(vec!["z", fill[(i + 2) % 6], "w", "z", fill[(i + 3) % 6], "w", "z"]);
        }
        let refs: Vec<&[&str]> = sentences.iter().map(Vec::as_slice).collect();
        let s = store(&refs);
        let v = build_vocab(&s, 1);
        let cos = |t: &EmbeddingTable, a: &str, b: &str| {
            let (x, y) = (t.lookup(a), t.lookup(b));
            dot(x, y) / (dot(x, x).sqrt() * dot(y, y).sqrt())
        };
        let mut wins = 0;
        for seed in 0..20 {
            let cfg = SgnsConfig {
                dim: 4,
                epochs: 5,
                seed,
                ..SgnsConfig::default()
            };
            let t = train_embeddings(&[&s], &v, &cfg).unwrap();
            assert!(t.row(PAD_ID).iter().all(|&x| x == 0.0));
            if cos(&t, "x", "y") > cos(&t, "x", "z") {
                wins += 1;
            }
        }
        assert!(wins >= 19, "only {wins}/20 seeds separate the tokens");
    }

    #[test]
    fn file_round_trip_and_reproducibility() {
        let s = store(&[&["a", "b", "c", "a"], &["c", "b", "d"]]);
        let v = build_vocab(&s, 1);
        let cfg = SgnsConfig {
            dim: 5,
            epochs: 2,
            seed: 9,
            ..SgnsConfig::default()
        };
        let t = train_embeddings(&[&s], &v, &cfg).unwrap();
        assert_eq!(t, train_embeddings(&[&s], &v, &cfg).unwrap());
        let (back, prov) = EmbeddingTable::from_bytes(&t.to_bytes("seed=9\n")).unwrap();
        assert_eq!(back, t);
        assert_eq!(prov, "seed=9\n");
    }
}
