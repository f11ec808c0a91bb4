//! Cached Code MSAs and batch scoring of function pairs.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{build_msa, FunctionStore, NGramIndex};
use crate::embeddings::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{Model, PackedMsa, Real};
use crate::scorer::{pool_packed, score, PooledFragment, Score, SimilarityConfig};

/// Packed MSAs for a fixed depth, width and retrieval index, keyed by function id.
#[derive(Debug, Clone)]
pub struct MsaCache {
    pub r: usize,
    pub l: usize,
    pub index_digest: String,
    msas: HashMap<String, PackedMsa>,
}

impl MsaCache {
    pub fn new(r: usize, l: usize, index: &NGramIndex) -> MsaCache {
        MsaCache {
            r,
            l,
            index_digest: index.digest(),
            msas: HashMap::new(),
        }
    }

    /// Builds the MSAs of `ids` not cached yet. Queries come from `functions`,
    /// retrieved rows from `corpus`.
    pub fn extend<'a, I>(
        &mut self,
        ids: I,
        functions: &FunctionStore,
        corpus: &FunctionStore,
        index: &NGramIndex,
        vocab: &Vocabulary,
    ) -> Result<()>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut todo: Vec<&str> = ids.into_iter().filter(|id| !self.msas.contains_key(*id)).collect();
        todo.sort_unstable();
        todo.dedup();
        let (r, l) = (self.r, self.l);
        let built: Vec<Result<(String, PackedMsa)>> = todo
            .par_iter()
            .map(|&id| {
                let f = functions
                    .get(id)
                    .ok_or_else(|| Error::Data(format!("unknown function `{id}`")))?;
                let msa = build_msa(f, corpus, index, r, l);
                Ok((id.to_string(), PackedMsa::from_msa(&msa, vocab)))
            })
            .collect();
        for b in built {
            let (id, m) = b?;
            self.msas.insert(id, m);
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&PackedMsa> {
        self.msas
            .get(id)
            .ok_or_else(|| Error::Data(format!("no cached MSA for `{id}`")))
    }

    pub fn len(&self) -> usize {
        self.msas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msas.is_empty()
    }
}

/// Encodes and pools one function's MSA.
pub fn fragment<T: Real>(model: &Model<T>, msa: &PackedMsa) -> Result<PooledFragment<T>> {
    let (y, _) = model.encode(msa);
    pool_packed(&msa.layout, &y, model.cfg.d)
}

/// Scores `(id1, id2)` pairs, encoding each distinct function once.
pub fn score_pairs<T: Real>(
    model: &Model<T>,
    cache: &MsaCache,
    pairs: &[(&str, &str)],
    sim: &SimilarityConfig,
) -> Result<Vec<Score>> {
    let mut ids: Vec<&str> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let frags: Vec<Result<PooledFragment<T>>> = ids.par_iter().map(|&id| fragment(model, cache.get(id)?)).collect();
    let mut by_id = HashMap::with_capacity(ids.len());
    for (id, f) in ids.into_iter().zip(frags) {
        by_id.insert(id, f?);
    }
    Ok(pairs
        .par_iter()
        .map(|(a, b)| score(&by_id[a], &by_id[b], sim))
        .collect())
}
