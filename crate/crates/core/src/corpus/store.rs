use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::lexer::{extract_functions_with, tokenize, Language, SourceFunction, Token, TokenSequence, CONTEXT_TOKENS};

/// One function as stored in the corpus: its tokens and surrounding file context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFunction {
    pub id: String,
    pub file_path: String,
    pub tokens: Vec<Token>,
    pub context_before: Vec<Token>,
    pub context_after: Vec<Token>,
}

impl StoredFunction {
    pub fn sequence(&self) -> TokenSequence {
        TokenSequence::new(self.id.clone(), self.tokens.clone())
    }
}

impl From<SourceFunction> for StoredFunction {
    fn from(f: SourceFunction) -> Self {
        StoredFunction {
            id: f.id,
            file_path: f.file_path,
            tokens: f.tokens,
            context_before: f.context_before,
            context_after: f.context_after,
        }
    }
}

/// Id-ordered collection of non-empty functions in one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionStore {
    language: Language,
    functions: BTreeMap<String, StoredFunction>,
}

impl FunctionStore {
    pub fn new(language: Language) -> Self {
        FunctionStore {
            language,
            functions: BTreeMap::new(),
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// Adds a function. Empty token lists and duplicate ids are rejected.
    pub fn insert(&mut self, f: StoredFunction) -> Result<()> {
        if f.tokens.is_empty() {
            return Err(Error::Data(format!("function `{}` has no tokens", f.id)));
        }
        if self.functions.contains_key(&f.id) {
            return Err(Error::Data(format!("duplicate function id `{}`", f.id)));
        }
        self.functions.insert(f.id.clone(), f);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&StoredFunction> {
        self.functions.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.functions.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Functions in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &StoredFunction> {
        self.functions.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }

    /// Merges another store of the same language. Ids already present are kept as is.
    pub fn extend_from(&mut self, other: &FunctionStore) {
        for f in other.iter() {
            self.functions.entry(f.id.clone()).or_insert_with(|| f.clone());
        }
    }

    /// SHA-256 over the canonical content of every function, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.language.name().as_bytes());
        for f in self.functions.values() {
            h.update((f.id.len() as u64).to_le_bytes());
            h.update(f.id.as_bytes());
            for part in [&f.tokens, &f.context_before, &f.context_after] {
                h.update((part.len() as u64).to_le_bytes());
                for t in part.iter() {
                    h.update([t.ty as u8]);
                    h.update((t.text.len() as u64).to_le_bytes());
                    h.update(t.text.as_bytes());
                }
            }
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A file or record that could not be ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipRecord {
    pub source: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub store: FunctionStore,
    pub skipped: Vec<SkipRecord>,
}

/// One line of a function JSON-lines file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub id: String,
    pub language: String,
    pub code: String,
    pub file_path: String,
    pub start_line: usize,
    pub end_line: usize,
}

/// Reads a corpus from a directory tree of source files or a JSON-lines function file.
///
/// Files that fail to lex or have unbalanced braces are skipped and reported.
/// An input that yields no function at all is an error.
pub fn ingest(source: &Path, language: Language) -> Result<Ingested> {
    ingest_with(source, language, CONTEXT_TOKENS)
}

/// Like [`ingest`] with `context` tokens of surrounding code per side.
pub fn ingest_with(source: &Path, language: Language, context: usize) -> Result<Ingested> {
    let ingested = if source.is_dir() {
        ingest_dir(source, language, context)?
    } else {
        store_from_records_with(&read_function_records(source)?, language, context)
    };
    for s in &ingested.skipped {
        warn!("skipped {}: {}", s.source, s.reason);
    }
    if ingested.store.is_empty() {
        return Err(Error::Data(format!(
            "no {language} functions could be extracted from {}",
            source.display()
        )));
    }
    Ok(ingested)
}

fn ingest_dir(root: &Path, language: Language, context: usize) -> Result<Ingested> {
    let mut store = FunctionStore::new(language);
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if Language::from_extension(ext) != Some(language) {
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                skipped.push(SkipRecord {
                    source: rel,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match extract_functions_with(&text, language, &rel, context) {
            Ok(fns) => {
                for f in fns {
                    if f.tokens.is_empty() || store.contains(&f.id) {
                        continue;
                    }
                    store.insert(f.into())?;
                }
            }
            Err(e) => skipped.push(SkipRecord {
                source: rel,
                reason: e.to_string(),
            }),
        }
    }
    Ok(Ingested { store, skipped })
}

/// Reads function records; functions sharing a `file_path` give each other context, in line order.
pub fn read_function_records(path: &Path) -> Result<Vec<FunctionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FunctionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: bad function record: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Builds a store from in-memory records, deriving contexts from same-file neighbours.
pub fn store_from_records(records: &[FunctionRecord], language: Language) -> Ingested {
    store_from_records_with(records, language, CONTEXT_TOKENS)
}

pub fn store_from_records_with(records: &[FunctionRecord], language: Language, context: usize) -> Ingested {
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();
    let mut by_file: BTreeMap<&str, Vec<(usize, &FunctionRecord, Vec<Token>)>> = BTreeMap::new();
    for rec in records {
        let lang = match rec.language.parse::<Language>() {
            Ok(l) => l,
            Err(e) => {
                skipped.push(SkipRecord {
                    source: rec.id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if lang != language {
            skipped.push(SkipRecord {
                source: rec.id.clone(),
                reason: format!("language {lang} does not match corpus language {language}"),
            });
            continue;
        }
        if !seen.insert(rec.id.as_str()) {
            skipped.push(SkipRecord {
                source: rec.id.clone(),
                reason: "duplicate id".into(),
            });
            continue;
        }
        match tokenize(&rec.code, language) {
            Ok(seq) if !seq.is_empty() => {
                by_file
                    .entry(rec.file_path.as_str())
                    .or_default()
                    .push((rec.start_line, rec, seq.tokens));
            }
            Ok(_) => skipped.push(SkipRecord {
                source: rec.id.clone(),
                reason: "empty function".into(),
            }),
            Err(e) => skipped.push(SkipRecord {
                source: rec.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let mut store = FunctionStore::new(language);
    for (_, mut fns) in by_file {
        fns.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        for k in 0..fns.len() {
            let mut before: Vec<Token> = Vec::new();
            for (_, _, toks) in fns[..k].iter().rev() {
                if before.len() >= context {
                    break;
                }
                let take = (context - before.len()).min(toks.len());
                let mut chunk = toks[toks.len() - take..].to_vec();
                chunk.extend(before);
                before = chunk;
            }
            let mut after: Vec<Token> = Vec::new();
            for (_, _, toks) in &fns[k + 1..] {
                if after.len() >= context {
                    break;
                }
                let take = (context - after.len()).min(toks.len());
                after.extend_from_slice(&toks[..take]);
            }
            let (_, rec, toks) = &fns[k];
            store
                .insert(StoredFunction {
                    id: rec.id.clone(),
                    file_path: rec.file_path.clone(),
                    tokens: toks.clone(),
                    context_before: before,
                    context_after: after,
                })
                .expect("ids are unique and token lists non-empty");
        }
    }
    Ingested { store, skipped }
}
