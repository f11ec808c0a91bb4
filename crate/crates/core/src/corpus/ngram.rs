use crate::lexer::Token;

pub const DEFAULT_N: usize = 5;
pub const DEFAULT_BUCKETS: u32 = 1 << 20;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a, 64 bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash of one window: token texts joined by the 0x1f unit separator.
pub fn window_hash(window: &[Token]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, t) in window.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in t.text.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Sparse bag of hashed n-grams.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramVector {
    /// (bucket, count), sorted by bucket, counts > 0.
    entries: Vec<(u32, u32)>,
    norm: f64,
}

impl NGramVector {
    pub fn empty() -> Self {
        NGramVector {
            entries: Vec::new(),
            norm: 0.0,
        }
    }

    /// Builds a vector from (bucket, count) pairs; repeated buckets are summed, zero counts dropped.
    pub fn from_counts(mut counts: Vec<(u32, u32)>) -> Self {
        counts.sort_unstable();
        let mut entries: Vec<(u32, u32)> = Vec::with_capacity(counts.len());
        for (b, c) in counts {
            match entries.last_mut() {
                Some(last) if last.0 == b => last.1 += c,
                _ => entries.push((b, c)),
            }
        }
        entries.retain(|e| e.1 > 0);
        let norm = (sq_norm(&entries) as f64).sqrt();
        NGramVector { entries, norm }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, bucket: u32) -> u32 {
        self.entries
            .binary_search_by_key(&bucket, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Exact integer dot product.
    pub fn dot(&self, other: &NGramVector) -> u64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0u64);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 as u64 * b[j].1 as u64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

fn sq_norm(entries: &[(u32, u32)]) -> u64 {
    entries.iter().map(|e| e.1 as u64 * e.1 as u64).sum()
}

/// Counts every contiguous window of `n` tokens, hashed into `buckets` buckets.
pub fn ngram_vector_with(tokens: &[Token], n: usize, buckets: u32) -> NGramVector {
    assert!(n >= 1, "n-gram size must be at least 1");
    assert!(buckets >= 1, "bucket count must be at least 1");
    if tokens.len() < n {
        return NGramVector::empty();
    }
    let counts = tokens
        .windows(n)
        .map(|w| ((window_hash(w) % buckets as u64) as u32, 1))
        .collect();
    NGramVector::from_counts(counts)
}

pub fn ngram_vector(tokens: &[Token], n: usize) -> NGramVector {
    ngram_vector_with(tokens, n, DEFAULT_BUCKETS)
}

/// Score used for ranking: dot / (‖a‖·‖b‖), written so that index and brute force agree bitwise.
pub(crate) fn cosine_from_dot(dot: u64, na: f64, nb: f64) -> f64 {
    if dot == 0 || na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot as f64 / (na * nb)).min(1.0)
}

pub fn cosine(a: &NGramVector, b: &NGramVector) -> f64 {
    cosine_from_dot(a.dot(b), a.norm, b.norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::TokenType;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(*w, TokenType::Identifier)).collect()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
        assert_eq!(window_hash(&toks(&["a", "b"])), fnv1a64(b"a\x1fb"));
    }

    #[test]
    fn window_counts() {
        assert_eq!(ngram_vector(&toks(&["a", "b", "c", "d", "e"]), 5).entries().len(), 1);
        assert!(ngram_vector(&toks(&["a", "b", "c", "d"]), 5).is_empty());
        let v = ngram_vector(&toks(&["a"; 6]), 5);
        assert_eq!(v.entries().len(), 1);
        assert_eq!(v.entries()[0].1, 2);
        assert_eq!(v.norm(), 2.0);
    }

    #[test]
    fn cosine_examples() {
        let v = ngram_vector(&toks(&["x", "y", "z", "x", "y", "q", "r"]), 5);
        assert_eq!(cosine(&v, &v), 1.0);
        let a = NGramVector::from_counts(vec![(1, 1), (2, 1)]);
        let b = NGramVector::from_counts(vec![(2, 1), (3, 1)]);
        let c = NGramVector::from_counts(vec![(7, 4)]);
        assert!((cosine(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(cosine(&a, &c), 0.0);
        assert_eq!(cosine(&a, &NGramVector::empty()), 0.0);
    }
}
