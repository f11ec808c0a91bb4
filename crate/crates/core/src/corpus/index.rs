use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::ngram::{cosine_from_dot, ngram_vector_with, NGramVector};
use super::store::{hex, FunctionStore};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::lexer::Token;

const MAGIC: &[u8; 4] = b"ACCI";
const VERSION: u32 = 1;

/// Inverted index from n-gram bucket to the functions containing it.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramIndex {
    n: usize,
    bucket_count: u32,
    /// Function ids in ascending order; positions are ordinals.
    ids: Vec<String>,
    norms: Vec<f64>,
    /// Distinct buckets present, ascending.
    buckets: Vec<u32>,
    /// `offsets[i]..offsets[i + 1]` indexes the postings of `buckets[i]`.
    offsets: Vec<u32>,
    /// (ordinal, count), ascending ordinal within a bucket.
    postings: Vec<(u32, u32)>,
    provenance: String,
}

impl NGramIndex {
    /// Indexes every function of the store. Vectors are computed in parallel
    /// and merged in id order.
    pub fn build(store: &FunctionStore, n: usize, bucket_count: u32) -> NGramIndex {
        let fns: Vec<_> = store.iter().collect();
        let vectors: Vec<NGramVector> = fns
            .par_iter()
            .map(|f| ngram_vector_with(&f.tokens, n, bucket_count))
            .collect();
        let ids = fns.iter().map(|f| f.id.clone()).collect();
        let mut triples: Vec<(u32, u32, u32)> = Vec::new();
        for (ord, v) in vectors.iter().enumerate() {
            triples.extend(v.entries().iter().map(|&(b, c)| (b, ord as u32, c)));
        }
        triples.par_sort_unstable();
        let provenance = format!("store_digest={}\nlanguage={}\n", store.digest(), store.language());
        Self::from_parts(n, bucket_count, ids, triples, provenance)
    }

    fn from_parts(
        n: usize,
        bucket_count: u32,
        ids: Vec<String>,
        triples: Vec<(u32, u32, u32)>,
        provenance: String,
    ) -> NGramIndex {
        let mut sq = vec![0u64; ids.len()];
        let mut buckets = Vec::new();
        let mut offsets = Vec::new();
        let mut postings = Vec::with_capacity(triples.len());
        for (b, ord, c) in triples {
            if buckets.last() != Some(&b) {
                buckets.push(b);
                offsets.push(postings.len() as u32);
            }
            postings.push((ord, c));
            sq[ord as usize] += c as u64 * c as u64;
        }
        offsets.push(postings.len() as u32);
        NGramIndex {
            n,
            bucket_count,
            ids,
            norms: sq.iter().map(|&s| (s as f64).sqrt()).collect(),
            buckets,
            offsets,
            postings,
            provenance,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bucket_count(&self) -> u32 {
        self.bucket_count
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Appends `key=value` lines to the stored provenance.
    pub fn append_provenance(&mut self, text: &str) {
        self.provenance.push_str(text);
        if !text.ends_with('\n') {
            self.provenance.push('\n');
        }
    }

    /// Whether this index was built from exactly `store`.
    pub fn built_from(&self, store: &FunctionStore) -> bool {
        self.provenance
            .lines()
            .any(|l| l.strip_prefix("store_digest=") == Some(store.digest().as_str()))
    }

    pub fn vector(&self, tokens: &[Token]) -> NGramVector {
        ngram_vector_with(tokens, self.n, self.bucket_count)
    }

    fn postings_of(&self, bucket: u32) -> &[(u32, u32)] {
        match self.buckets.binary_search(&bucket) {
            Ok(i) => &self.postings[self.offsets[i] as usize..self.offsets[i + 1] as usize],
            Err(_) => &[],
        }
    }

    /// All candidates with positive cosine, best first, ties by ascending id.
    pub fn scored(&self, query_id: &str, tokens: &[Token]) -> Vec<(f64, &str)> {
        let q = self.vector(tokens);
        let mut dots = vec![0u64; self.ids.len()];
        let mut touched = Vec::new();
        for &(b, qc) in q.entries() {
            for &(ord, c) in self.postings_of(b) {
                let d = &mut dots[ord as usize];
                if *d == 0 {
                    touched.push(ord);
                }
                *d += qc as u64 * c as u64;
            }
        }
        let mut out: Vec<(f64, &str)> = touched
            .into_iter()
            .filter(|&o| self.ids[o as usize] != query_id)
            .map(|o| {
                let o = o as usize;
                (cosine_from_dot(dots[o], q.norm(), self.norms[o]), self.ids[o].as_str())
            })
            .filter(|s| s.0 > 0.0)
            .collect();
        out.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        out
    }

    /// The `k` most similar functions other than the query itself. Missing
    /// slots are filled with the query id.
    pub fn retrieve_topk(&self, query_id: &str, tokens: &[Token], k: usize) -> Vec<String> {
        let mut out: Vec<String> = self
            .scored(query_id, tokens)
            .into_iter()
            .take(k)
            .map(|s| s.1.to_string())
            .collect();
        out.resize(k, query_id.to_string());
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new(MAGIC, VERSION);
        w.u32(self.n as u32);
        w.u32(self.bucket_count);
        w.u32(self.ids.len() as u32);
        for id in &self.ids {
            w.str(id);
        }
        w.u64(self.postings.len() as u64);
        for (i, &b) in self.buckets.iter().enumerate() {
            for &(ord, c) in &self.postings[self.offsets[i] as usize..self.offsets[i + 1] as usize] {
                w.u32(b);
                w.u32(ord);
                w.u32(c);
            }
        }
        w.str(&self.provenance);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NGramIndex> {
        let mut r = ByteReader::new(bytes, MAGIC, VERSION)?;
        let n = r.u32()? as usize;
        let bucket_count = r.u32()?;
        if n == 0 || bucket_count == 0 {
            return Err(Error::Format("index header has zero n or bucket count".into()));
        }
        let count = r.u32()? as usize;
        let mut ids = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            ids.push(r.str()?);
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("index ids are not strictly ascending".into()));
        }
        let np = r.u64()? as usize;
        let mut triples: Vec<(u32, u32, u32)> = Vec::with_capacity(np.min(1 << 24));
        for _ in 0..np {
            let t = (r.u32()?, r.u32()?, r.u32()?);
            if t.0 >= bucket_count || t.1 as usize >= ids.len() || t.2 == 0 {
                return Err(Error::Format("index posting out of range".into()));
            }
            if let Some(last) = triples.last() {
                if (t.0, t.1) <= (last.0, last.1) {
                    return Err(Error::Format("index postings are not sorted".into()));
                }
            }
            triples.push(t);
        }
        let provenance = r.str()?;
        r.end()?;
        Ok(Self::from_parts(n, bucket_count, ids, triples, provenance))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NGramIndex> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_bytes()))
    }
}

/// Reference top-k by scanning every stored function.
pub fn brute_force_topk(
    store: &FunctionStore,
    query_id: &str,
    tokens: &[Token],
    k: usize,
    n: usize,
    bucket_count: u32,
) -> Vec<String> {
    let q = ngram_vector_with(tokens, n, bucket_count);
    let mut all: Vec<(f64, &str)> = store
        .iter()
        .filter(|f| f.id != query_id)
        .map(|f| {
            let v = ngram_vector_with(&f.tokens, n, bucket_count);
            (cosine_from_dot(q.dot(&v), q.norm(), v.norm()), f.id.as_str())
        })
        .filter(|s| s.0 > 0.0)
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let mut out: Vec<String> = all.into_iter().take(k).map(|s| s.1.to_string()).collect();
    out.resize(k, query_id.to_string());
    out
}
