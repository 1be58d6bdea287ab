//! Tokenization and token-level distance helpers shared by the lexicon
//! oracle, the pipeline, and the evaluation metrics.
//!
//! Tokens are lowercase runs of alphanumeric characters (plus `'` so that
//! contractions like `isn't` survive). Punctuation separates tokens, so
//! pre-segmented Chinese text tokenizes the same way as English.

/// A token together with its byte range in the original text.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits `text` into lowercase tokens with byte offsets into the original.
pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0usize;
    for (idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() || ch == '\'' {
            if current.is_empty() {
                start = idx;
            }
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                start,
                end: idx,
            });
        }
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            start,
            end: text.len(),
        });
    }
    tokens
}

/// Splits `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical form used for exact-match comparisons: lowercase tokens joined
/// by single spaces.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Whether the token sequence `needle` occurs contiguously inside the token
/// sequence of `haystack` (case-insensitive, token-boundary aware).
pub fn contains_token_seq(haystack: &str, needle: &str) -> bool {
    let h = tokenize(haystack);
    let n = tokenize(needle);
    if n.is_empty() || n.len() > h.len() {
        return false;
    }
    h.windows(n.len()).any(|w| w == n.as_slice())
}

/// Token-level Levenshtein distance normalized into `[0,1]` by the longer
/// token count. Two texts with identical token sequences are at distance 0.
pub fn token_distance(a: &str, b: &str) -> f64 {
    let ta = tokenize(a);
    let tb = tokenize(b);
    let max_len = ta.len().max(tb.len());
    if max_len == 0 {
        return 0.0;
    }
    levenshtein(&ta, &tb) as f64 / max_len as f64
}

fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let cost = usize::from(ai != bj);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}
