//! Function corpus, n-gram retrieval and Code MSA assembly.

mod index;
mod msa;
mod ngram;
mod store;

pub use index::{brute_force_topk, NGramIndex};
pub use msa::{build_msa, standardize, CodeMsa, MsaCell, PAD_TEXT};
pub use ngram::{cosine, fnv1a64, ngram_vector, ngram_vector_with, NGramVector, DEFAULT_BUCKETS, DEFAULT_N};
pub(crate) use store::hex;
pub use store::{
    ingest, ingest_with, read_function_records, store_from_records, store_from_records_with, FunctionRecord,
    FunctionStore, Ingested, SkipRecord, StoredFunction,
};
