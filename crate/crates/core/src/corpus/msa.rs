use serde::{Deserialize, Serialize};

use super::index::NGramIndex;
use super::store::{FunctionStore, StoredFunction};
use crate::lexer::{Token, TokenType};

/// Text of the reserved padding token.
pub const PAD_TEXT: &str = "<pad>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsaCell {
    pub token: Token,
    pub valid: bool,
}

impl MsaCell {
    pub fn pad() -> Self {
        MsaCell {
            token: Token::new(PAD_TEXT, TokenType::Separator),
            valid: false,
        }
    }

    fn of(token: &Token) -> Self {
        MsaCell {
            token: token.clone(),
            valid: true,
        }
    }
}

/// R rows of L cells. Row 0 is the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMsa {
    pub rows: Vec<Vec<MsaCell>>,
    /// Function id behind each row.
    pub row_ids: Vec<String>,
}

impl CodeMsa {
    pub fn depth(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Number of valid cells per row (valid cells are always a prefix).
    pub fn valid_lengths(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| r.iter().take_while(|c| c.valid).count())
            .collect()
    }

    pub fn is_valid(&self, r: usize, c: usize) -> bool {
        self.rows[r][c].valid
    }

    /// Same MSA with retrieved rows reordered; `perm` maps new row k to old row `perm[k]`.
    pub fn permute_retrieved(&self, perm: &[usize]) -> CodeMsa {
        assert_eq!(perm.len() + 1, self.depth(), "permutation must cover rows 1..R");
        let mut rows = vec![self.rows[0].clone()];
        let mut row_ids = vec![self.row_ids[0].clone()];
        for &p in perm {
            assert!(p >= 1 && p < self.depth());
            rows.push(self.rows[p].clone());
            row_ids.push(self.row_ids[p].clone());
        }
        CodeMsa { rows, row_ids }
    }
}

/// Fits a function to exactly `l` cells.
///
/// Long functions are truncated. Short ones are extended with surrounding
/// code, alternating one token after and one token before (nearest first),
/// and any remaining cells are padding on the right.
pub fn standardize(tokens: &[Token], context_before: &[Token], context_after: &[Token], l: usize) -> Vec<MsaCell> {
    assert!(l >= 1, "standardized length must be at least 1");
    if tokens.len() >= l {
        return tokens[..l].iter().map(MsaCell::of).collect();
    }
    let mut before: Vec<&Token> = Vec::new();
    let mut after: Vec<&Token> = Vec::new();
    let mut next_after = context_after.iter();
    let mut next_before = context_before.iter().rev();
    let mut append = true;
    let mut len = tokens.len();
    while len < l {
        let t = if append {
            next_after.next().map(|t| after.push(t))
        } else {
            next_before.next().map(|t| before.push(t))
        };
        if t.is_some() {
            len += 1;
        } else {
            let other = if append {
                next_before.next().map(|t| before.push(t))
            } else {
                next_after.next().map(|t| after.push(t))
            };
            if other.is_none() {
                break;
            }
            len += 1;
        }
        append = !append;
    }
    let mut row: Vec<MsaCell> = Vec::with_capacity(l);
    row.extend(before.iter().rev().map(|t| MsaCell::of(t)));
    row.extend(tokens.iter().map(MsaCell::of));
    row.extend(after.iter().map(|t| MsaCell::of(t)));
    row.resize(l, MsaCell::pad());
    row
}

fn standardize_fn(f: &StoredFunction, l: usize) -> Vec<MsaCell> {
    standardize(&f.tokens, &f.context_before, &f.context_after, l)
}

/// Builds the query's Code MSA: the standardized query followed by its `r - 1`
/// nearest neighbours in rank order. `r = 1` skips retrieval.
pub fn build_msa(query: &StoredFunction, store: &FunctionStore, index: &NGramIndex, r: usize, l: usize) -> CodeMsa {
    assert!(r >= 1, "MSA depth must be at least 1");
    let q_row = standardize_fn(query, l);
    let mut rows = vec![q_row.clone()];
    let mut row_ids = vec![query.id.clone()];
    if r > 1 {
        for id in index.retrieve_topk(&query.id, &query.tokens, r - 1) {
            match store.get(&id) {
                Some(f) if id != query.id => rows.push(standardize_fn(f, l)),
                _ => rows.push(q_row.clone()),
            }
            row_ids.push(id);
        }
    }
    CodeMsa { rows, row_ids }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::Language;

    fn toks(prefix: &str, n: usize) -> Vec<Token> {
        (0..n)
            .map(|i| Token::new(format!("{prefix}{i}"), TokenType::Identifier))
            .collect()
    }

    fn texts(row: &[MsaCell]) -> Vec<&str> {
        row.iter().map(|c| c.token.text.as_str()).collect()
    }

    #[test]
    fn exact_fit_and_truncation() {
        let s = toks("s", 6);
        let row = standardize(&s, &toks("b", 3), &toks("a", 3), 6);
        assert_eq!(texts(&row), ["s0", "s1", "s2", "s3", "s4", "s5"]);
        let row = standardize(&toks("s", 11), &[], &[], 6);
        assert_eq!(texts(&row), ["s0", "s1", "s2", "s3", "s4", "s5"]);
        assert!(row.iter().all(|c| c.valid));
    }

    #[test]
    fn padding_trace() {
        // L = 8, |seq| = 5, two tokens of following context, none before.
        let row = standardize(&toks("s", 5), &[], &toks("a", 2), 8);
        assert_eq!(texts(&row), ["s0", "s1", "s2", "s3", "s4", "a0", "a1", PAD_TEXT]);
        assert_eq!(row.iter().filter(|c| c.valid).count(), 7);
    }

    #[test]
    fn alternation_nearest_first() {
        let row = standardize(&toks("s", 2), &toks("b", 3), &toks("a", 3), 6);
        assert_eq!(texts(&row), ["b1", "b2", "s0", "s1", "a0", "a1"]);
        let row = standardize(&toks("s", 2), &toks("b", 5), &toks("a", 1), 6);
        assert_eq!(texts(&row), ["b2", "b3", "b4", "s0", "s1", "a0"]);
    }

    #[test]
    fn empty_store_repeats_query() {
        let store = FunctionStore::new(Language::JavaLike);
        let idx = NGramIndex::build(&store, 5, 1 << 20);
        let q = StoredFunction {
            id: "q".into(),
            file_path: "q.java".into(),
            tokens: toks("s", 7),
            context_before: vec![],
            context_after: vec![],
        };
        let msa = build_msa(&q, &store, &idx, 5, 10);
        assert_eq!(msa.depth(), 5);
        assert!(msa.rows.iter().all(|r| r == &msa.rows[0]));
        assert_eq!(build_msa(&q, &store, &idx, 1, 10).depth(), 1);
    }
}
