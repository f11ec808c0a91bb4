//! Flat `key = value` configuration with strict keys.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::embeddings::SgnsConfig;
use crate::error::{Error, Result};
use crate::model::{EnhancerMode, ModelConfig};
use crate::scorer::{Measure, SimilarityConfig};
use crate::trainer::Loss;

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub l: usize,
    pub r: usize,
    pub d: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    pub ngram: usize,
    pub buckets: u32,
    pub context: usize,
    pub gamma: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: Loss,
    pub measure: Measure,
    pub symmetrize: bool,
    pub tau: f64,
    pub enhancer_mode: EnhancerMode,
    pub freeze_embeddings: bool,
    pub embed_window: usize,
    pub embed_negatives: usize,
    pub embed_epochs: usize,
    pub embed_min_count: u64,
    pub embed_include_dataset: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            l: 256,
            r: 5,
            d: 256,
            heads: 4,
            blocks: 2,
            d_ff: 512,
            ngram: 5,
            buckets: 1 << 20,
            context: 64,
            gamma: 0.5,
            lr: 1e-4,
            epochs: 1,
            batch_size: 32,
            seed: 0,
            loss: Loss::Margin,
            measure: Measure::LateInteraction,
            symmetrize: true,
            tau: 1.0,
            enhancer_mode: EnhancerMode::Full,
            freeze_embeddings: false,
            embed_window: 5,
            embed_negatives: 5,
            embed_epochs: 5,
            embed_min_count: 1,
            embed_include_dataset: true,
        }
    }
}

/// Recognized keys, in the order they are written out.
pub const KEYS: &[&str] = &[
    "L",
    "R",
    "d",
    "H",
    "B",
    "d_ff",
    "ngram",
    "buckets",
    "context",
    "gamma",
    "lr",
    "epochs",
    "batch_size",
    "seed",
    "loss",
    "measure",
    "symmetrize",
    "tau",
    "enhancer.mode",
    "freeze_embeddings",
    "embed.window",
    "embed.negatives",
    "embed.epochs",
    "embed.min_count",
    "embed.include_dataset",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl Config {
    /// Sets one key. Unknown keys are an error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "L" => self.l = parse(key, v)?,
            "R" => self.r = parse(key, v)?,
            "d" => self.d = parse(key, v)?,
            "H" => self.heads = parse(key, v)?,
            "B" => self.blocks = parse(key, v)?,
            "d_ff" => self.d_ff = parse(key, v)?,
            "ngram" => self.ngram = parse(key, v)?,
            "buckets" => self.buckets = parse(key, v)?,
            "context" => self.context = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "loss" => self.loss = v.parse()?,
            "measure" => self.measure = v.parse()?,
            "symmetrize" => self.symmetrize = parse_bool(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "enhancer.mode" => self.enhancer_mode = v.parse()?,
            "freeze_embeddings" => self.freeze_embeddings = parse_bool(key, v)?,
            "embed.window" => self.embed_window = parse(key, v)?,
            "embed.negatives" => self.embed_negatives = parse(key, v)?,
            "embed.epochs" => self.embed_epochs = parse(key, v)?,
            "embed.min_count" => self.embed_min_count = parse(key, v)?,
            "embed.include_dataset" => self.embed_include_dataset = parse_bool(key, v)?,
            other => {
                let hint = suggest(other)
                    .map(|k| format!(" (did you mean `{k}`?)"))
                    .unwrap_or_default();
                return Err(Error::Config(format!("unknown config key `{other}`{hint}")));
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides such as those given with `--set`.
    pub fn apply_pairs<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        for p in pairs {
            let p = p.as_ref();
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{p}`")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "L" => self.l.to_string(),
            "R" => self.r.to_string(),
            "d" => self.d.to_string(),
            "H" => self.heads.to_string(),
            "B" => self.blocks.to_string(),
            "d_ff" => self.d_ff.to_string(),
            "ngram" => self.ngram.to_string(),
            "buckets" => self.buckets.to_string(),
            "context" => self.context.to_string(),
            "gamma" => format!("{:?}", self.gamma),
            "lr" => format!("{:?}", self.lr),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "seed" => self.seed.to_string(),
            "loss" => self.loss.to_string(),
            "measure" => self.measure.to_string(),
            "symmetrize" => self.symmetrize.to_string(),
            "tau" => format!("{:?}", self.tau),
            "enhancer.mode" => self.enhancer_mode.to_string(),
            "freeze_embeddings" => self.freeze_embeddings.to_string(),
            "embed.window" => self.embed_window.to_string(),
            "embed.negatives" => self.embed_negatives.to_string(),
            "embed.epochs" => self.embed_epochs.to_string(),
            "embed.min_count" => self.embed_min_count.to_string(),
            "embed.include_dataset" => self.embed_include_dataset.to_string(),
            _ => return None,
        })
    }

    /// Every key as a `key=value` line; parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k}={}", self.get(k).expect("known key"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Config> {
        let mut c = Config::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.r == 0 || self.l == 0 {
            return bad("R and L must be at least 1");
        }
        if self.gamma <= 0.0 || self.gamma.is_nan() {
            return bad("gamma must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.ngram == 0 || self.buckets == 0 {
            return bad("ngram and buckets must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive and finite");
        }
        let (lo, hi) = match self.measure {
            Measure::Cosine => (-1.0, 1.0),
            _ => (0.0, 2.0),
        };
        if !(lo..=hi).contains(&self.tau) {
            return Err(Error::Config(format!(
                "tau {} outside [{lo}, {hi}] for measure {}",
                self.tau, self.measure
            )));
        }
        self.model(2).validate()
    }

    pub fn model(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d: self.d,
            l: self.l,
            heads: self.heads,
            blocks: self.blocks,
            d_ff: self.d_ff,
            mode: self.enhancer_mode,
        }
    }

    pub fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig {
            measure: self.measure,
            symmetrize: self.symmetrize,
            tau: self.tau,
        }
    }

    pub fn sgns(&self) -> SgnsConfig {
        SgnsConfig {
            dim: self.d,
            window: self.embed_window,
            negatives: self.embed_negatives,
            epochs: self.embed_epochs,
            seed: self.seed,
            ..SgnsConfig::default()
        }
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn suggest(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .map(|k| (edit_distance(key, k), *k))
        .filter(|(dist, _)| *dist <= 2)
        .min()
        .map(|(_, k)| k)
}

/// Layers defaults, then an optional file, then `key=value` overrides.
pub fn resolve_config<S: AsRef<str>>(file: Option<&Path>, overrides: &[S]) -> Result<Config> {
    let mut c = Config::default();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        c.apply_text(&text)?;
    }
    c.apply_pairs(overrides)?;
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = resolve_config::<&str>(None, &[]).unwrap();
        assert_eq!((c.gamma, c.lr, c.epochs, c.d), (0.5, 1e-4, 1, 256));
        assert_eq!((c.r, c.l, c.heads, c.blocks, c.d_ff), (5, 256, 4, 2, 512));
    }

    #[test]
    fn precedence_and_strict_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        fs::write(&path, "# depth\nR = 3\n").unwrap();
        let c = resolve_config(Some(&path), &["R=1"]).unwrap();
        assert_eq!(c.r, 1);
        assert_eq!(resolve_config::<&str>(Some(&path), &[]).unwrap().r, 3);
        fs::write(&path, "ganma = 0.4\n").unwrap();
        let err = resolve_config::<&str>(Some(&path), &[]).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("ganma") && m.contains("gamma")));
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.apply_pairs(&["measure=cosine", "tau=0.25", "enhancer.mode=off", "lr=0.001"])
            .unwrap();
        assert_eq!(Config::from_text(&c.to_text()).unwrap(), c);
    }
}
