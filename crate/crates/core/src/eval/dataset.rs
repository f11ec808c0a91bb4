use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{hex, read_function_records, store_from_records, FunctionRecord, FunctionStore};
use crate::error::{Error, Result};
use crate::lexer::Language;

pub const FUNCTIONS_FILE: &str = "functions.jsonl";

/// Clone-type tiers, weakest to strongest transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CloneType {
    T1,
    T2,
    ST3,
    MT3,
    T4,
}

impl CloneType {
    pub const ALL: [CloneType; 5] = [
        CloneType::T1,
        CloneType::T2,
        CloneType::ST3,
        CloneType::MT3,
        CloneType::T4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CloneType::T1 => "T1",
            CloneType::T2 => "T2",
            CloneType::ST3 => "ST3",
            CloneType::MT3 => "MT3",
            CloneType::T4 => "T4",
        }
    }
}

impl fmt::Display for CloneType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A labeled fragment pair; `label` is +1 for clones and −1 otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClonePair {
    pub id1: String,
    pub id2: String,
    pub label: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clone_type: Option<CloneType>,
}

impl ClonePair {
    pub fn is_clone(&self) -> bool {
        self.label > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn file_name(self) -> String {
        format!("pairs_{}.jsonl", self.name())
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}`"))),
        }
    }
}

/// Functions plus the labeled pairs of one split.
#[derive(Debug, Clone)]
pub struct ClonePairDataset {
    pub functions: FunctionStore,
    pub pairs: Vec<ClonePair>,
    pub split: Split,
}

impl ClonePairDataset {
    pub fn new(functions: FunctionStore, pairs: Vec<ClonePair>, split: Split) -> Result<Self> {
        validate_pairs(&functions, &pairs, split)?;
        Ok(ClonePairDataset {
            functions,
            pairs,
            split,
        })
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_clone()).count()
    }

    pub fn digest(&self) -> String {
        pairs_digest(&self.functions, &[&self.pairs])
    }
}

/// A function file with its train, validation and test pairs.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub records: Vec<FunctionRecord>,
    pub functions: FunctionStore,
    pub train: Vec<ClonePair>,
    pub validation: Vec<ClonePair>,
    pub test: Vec<ClonePair>,
}

impl Benchmark {
    pub fn from_parts(
        records: Vec<FunctionRecord>,
        language: Language,
        train: Vec<ClonePair>,
        validation: Vec<ClonePair>,
        test: Vec<ClonePair>,
    ) -> Result<Benchmark> {
        let ingested = store_from_records(&records, language);
        if let Some(s) = ingested.skipped.first() {
            return Err(Error::Data(format!("function {} rejected: {}", s.source, s.reason)));
        }
        let b = Benchmark {
            records,
            functions: ingested.store,
            train,
            validation,
            test,
        };
        for split in Split::ALL {
            validate_pairs(&b.functions, b.pairs(split), split)?;
        }
        Ok(b)
    }

    pub fn pairs(&self, split: Split) -> &[ClonePair] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn dataset(&self, split: Split) -> ClonePairDataset {
        ClonePairDataset {
            functions: self.functions.clone(),
            pairs: self.pairs(split).to_vec(),
            split,
        }
    }

    pub fn language(&self) -> Language {
        self.functions.language()
    }

    pub fn digest(&self) -> String {
        pairs_digest(&self.functions, &[&self.train, &self.validation, &self.test])
    }

    /// Writes `functions.jsonl` and one `pairs_<split>.jsonl` per split.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(FUNCTIONS_FILE), &self.records)?;
        for split in Split::ALL {
            write_jsonl(&dir.join(split.file_name()), self.pairs(split))?;
        }
        Ok(())
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).map_err(|e| Error::Data(e.to_string()))?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

fn pairs_digest(functions: &FunctionStore, splits: &[&[ClonePair]]) -> String {
    let mut h = Sha256::new();
    h.update(functions.digest().as_bytes());
    for pairs in splits {
        h.update(b"\x1e");
        for p in pairs.iter() {
            let t = p.clone_type.map(|t| t.name()).unwrap_or("-");
            h.update(format!("{}\x1f{}\x1f{}\x1f{t}\n", p.id1, p.id2, p.label).as_bytes());
        }
    }
    hex(&h.finalize())
}

fn validate_pairs(functions: &FunctionStore, pairs: &[ClonePair], split: Split) -> Result<()> {
    let mut seen = HashSet::new();
    for (n, p) in pairs.iter().enumerate() {
        if p.label != 1 && p.label != -1 {
            return Err(Error::Data(format!(
                "{split} pair {n} ({}, {}): label must be -1 or 1, got {}",
                p.id1, p.id2, p.label
            )));
        }
        for id in [&p.id1, &p.id2] {
            if !functions.contains(id) {
                return Err(Error::Data(format!(
                    "{split} pair {n} ({}, {}) references unknown function `{id}`",
                    p.id1, p.id2
                )));
            }
        }
        let key = if p.id1 <= p.id2 {
            (&p.id1, &p.id2)
        } else {
            (&p.id2, &p.id1)
        };
        if !seen.insert(key) {
            return Err(Error::Data(format!(
                "{split} pair {n} ({}, {}) is a duplicate",
                p.id1, p.id2
            )));
        }
    }
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<ClonePair>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: ClonePair = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: bad pair: {e}", path.display(), n + 1)))?;
        out.push(p);
    }
    Ok(out)
}

fn detect_language(records: &[FunctionRecord]) -> Result<Language> {
    let first = records
        .first()
        .ok_or_else(|| Error::Data("function file is empty".into()))?;
    first.language.parse()
}

/// Loads a dataset directory. Missing split files count as empty splits.
pub fn load_benchmark(dir: &Path) -> Result<Benchmark> {
    let records = read_function_records(&dir.join(FUNCTIONS_FILE))?;
    let language = detect_language(&records)?;
    let mut splits = Vec::new();
    for split in Split::ALL {
        let path = dir.join(split.file_name());
        splits.push(if path.exists() { read_pairs(&path)? } else { Vec::new() });
    }
    let test = splits.pop().unwrap_or_default();
    let validation = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Benchmark::from_parts(records, language, train, validation, test)
}

/// Loads one split from a dataset directory, or from a pairs file next to `functions.jsonl`.
pub fn load_dataset(path: &Path, split: Split) -> Result<ClonePairDataset> {
    if path.is_dir() {
        return Ok(load_benchmark(path)?.dataset(split));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let records = read_function_records(&dir.join(FUNCTIONS_FILE))?;
    let language = detect_language(&records)?;
    let ingested = store_from_records(&records, language);
    ClonePairDataset::new(ingested.store, read_pairs(path)?, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, code: &str) -> FunctionRecord {
        FunctionRecord {
            id: id.into(),
            language: "java".into(),
            code: code.into(),
            file_path: format!("{id}.java"),
            start_line: 1,
            end_line: 1,
        }
    }

    fn pair(a: &str, b: &str, label: i8) -> ClonePair {
        ClonePair {
            id1: a.into(),
            id2: b.into(),
            label,
            clone_type: None,
        }
    }

    fn two() -> Vec<FunctionRecord> {
        vec![rec("a", "int f(){return 1;}"), rec("b", "int g(){return 2;}")]
    }

    #[test]
    fn round_trip_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let b = Benchmark::from_parts(two(), Language::JavaLike, vec![pair("a", "b", 1)], vec![], vec![]).unwrap();
        b.write(dir.path()).unwrap();
        let again = load_benchmark(dir.path()).unwrap();
        assert_eq!(again.train.len(), 1);
        assert_eq!(again.digest(), b.digest());
        assert_eq!(load_benchmark(dir.path()).unwrap().digest(), b.digest());
        let ds = load_dataset(&dir.path().join("pairs_train.jsonl"), Split::Train).unwrap();
        assert_eq!(ds.pairs.len(), 1);
    }

    #[test]
    fn integrity_errors() {
        let bad = Benchmark::from_parts(two(), Language::JavaLike, vec![pair("a", "zz", 1)], vec![], vec![]);
        assert!(matches!(bad, Err(Error::Data(m)) if m.contains("zz")));
        let dup = vec![pair("a", "b", 1), pair("b", "a", -1)];
        assert!(matches!(
            Benchmark::from_parts(two(), Language::JavaLike, dup, vec![], vec![]),
            Err(Error::Data(m)) if m.contains("duplicate")
        ));
        let label = Benchmark::from_parts(two(), Language::JavaLike, vec![pair("a", "b", 0)], vec![], vec![]);
        assert!(label.is_err());
    }

    #[test]
    fn clone_type_json() {
        let p = ClonePair {
            clone_type: Some(CloneType::MT3),
            ..pair("a", "b", 1)
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"id1":"a","id2":"b","label":1,"clone_type":"MT3"}"#);
        let q: ClonePair = serde_json::from_str(r#"{"id1":"a","id2":"b","label":-1}"#).unwrap();
        assert_eq!(q.clone_type, None);
    }
}
