//! Tokenization and raw string-comparison metrics.
//!
//! Everything here is a pure function over token sequences. The metrics
//! (Levenshtein, n-gram overlap, symmetrized BLEU) feed the tree submodels
//! of the similarity ensemble as distance features.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("utterance is blank")]
    EmptyUtterance,
}

/// A tokenized user request. `tokens` is fully derived from `raw`:
/// re-tokenizing `raw` always reproduces it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces; the canonical surface used for
    /// character-level metrics.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    /// Build directly from pre-split tokens (all lowercase, no whitespace
    /// inside a token). Used when assembling sentences from patterns.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let raw = tokens.join(" ");
        Utterance { raw, tokens }
    }
}

impl std::fmt::Display for Utterance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.joined())
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Lowercase and split into word tokens.
///
/// Punctuation is detached as separate single-character tokens, except
/// inside tokens that contain `@` or a digit, so emails and dates survive
/// intact (`bob@domain.com`, `12/25`). Leading and trailing punctuation is
/// detached even from those.
pub fn tokenize(raw: &str) -> Result<Utterance, TextError> {
    if raw.trim().is_empty() {
        return Err(TextError::EmptyUtterance);
    }
    let mut tokens = Vec::new();
    for chunk in raw.to_lowercase().split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct(chars[start]) {
            start += 1;
        }
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        for &c in &chars[..start] {
            tokens.push(c.to_string());
        }
        if start < end {
            let core: String = chars[start..end].iter().collect();
            if core.contains('@') || core.chars().any(|c| c.is_ascii_digit()) {
                tokens.push(core);
            } else {
                let mut word = String::new();
                for c in core.chars() {
                    if is_punct(c) {
                        if !word.is_empty() {
                            tokens.push(std::mem::take(&mut word));
                        }
                        tokens.push(c.to_string());
                    } else {
                        word.push(c);
                    }
                }
                if !word.is_empty() {
                    tokens.push(word);
                }
            }
        }
        for &c in &chars[end..] {
            tokens.push(c.to_string());
        }
    }
    debug_assert!(!tokens.is_empty());
    Ok(Utterance {
        raw: raw.to_string(),
        tokens,
    })
}

/// Exact edit distance (insertions, deletions, substitutions) over chars.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Which unit n-grams are formed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgramUnit {
    Word,
    Char,
}

fn word_ngrams(u: &Utterance, n: usize) -> HashSet<Vec<String>> {
    if u.tokens.len() < n {
        return HashSet::new();
    }
    u.tokens.windows(n).map(|w| w.to_vec()).collect()
}

fn char_ngrams(u: &Utterance, n: usize) -> HashSet<Vec<char>> {
    let chars: Vec<char> = u.joined().chars().collect();
    if chars.len() < n {
        return HashSet::new();
    }
    chars.windows(n).map(|w| w.to_vec()).collect()
}

fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard ratio between the two sentences' n-gram sets. Character n-grams
/// are taken over the space-joined token string. Returns 0 when both sets
/// are empty.
pub fn ngram_overlap(a: &Utterance, b: &Utterance, n: usize, unit: NgramUnit) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    match unit {
        NgramUnit::Word => jaccard(&word_ngrams(a, n), &word_ngrams(b, n)),
        NgramUnit::Char => jaccard(&char_ngrams(a, n), &char_ngrams(b, n)),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// One-directional sentence BLEU of candidate `c` against reference `r`:
/// clipped n-gram precisions up to min(4, len(c)) with add-one smoothing,
/// geometric mean, and the standard brevity penalty.
fn bleu_directed(c: &Utterance, r: &Utterance) -> f64 {
    let clen = c.tokens.len();
    let rlen = r.tokens.len();
    if clen == 0 || rlen == 0 {
        return 0.0;
    }
    let max_n = clen.min(4);
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cc = ngram_counts(&c.tokens, n);
        let rc = ngram_counts(&r.tokens, n);
        let total: usize = cc.values().sum();
        let matched: usize = cc
            .iter()
            .map(|(g, &k)| k.min(rc.get(g).copied().unwrap_or(0)))
            .sum();
        log_sum += (((matched + 1) as f64) / ((total + 1) as f64)).ln();
    }
    let geo = (log_sum / max_n as f64).exp();
    let bp = if clen > rlen {
        1.0
    } else {
        (1.0 - rlen as f64 / clen as f64).exp()
    };
    bp * geo
}

/// Sentence BLEU computed in both directions and averaged, so the score is
/// symmetric in its arguments like every other feature.
pub fn bleu_sym(a: &Utterance, b: &Utterance) -> f64 {
    0.5 * (bleu_directed(a, b) + bleu_directed(b, a))
}
