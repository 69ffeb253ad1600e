//! Word embeddings, sentence averaging, and the pair representation fed to
//! the perceptrons.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::Utterance;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("i/o error reading embedding file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed embedding line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("cannot embed an empty utterance")]
    EmptyUtterance,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Token vectors of a fixed dimension, with a deterministic hash-based
/// fallback for out-of-vocabulary tokens. The fallback is a pure function of
/// the token, so the same token maps to the same vector across runs; it lets
/// the whole pipeline run self-contained when no real table is supplied, at
/// reduced quality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

const DEFAULT_DIMENSION: usize = 48;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl EmbeddingTable {
    /// An empty table: every token is served by the fallback generator.
    pub fn fallback_only() -> Self {
        Self::fallback_with_dimension(DEFAULT_DIMENSION)
    }

    pub fn fallback_with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0);
        EmbeddingTable {
            dimension,
            vectors: HashMap::new(),
        }
    }

    /// Load a plain-text table: one `token v1 v2 … vd` entry per line,
    /// with an optional `d=<dim>` header on the first line.
    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut dimension = None;
        let mut vectors = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 {
                if let Some(d) = line.strip_prefix("d=") {
                    dimension = Some(d.trim().parse::<usize>().map_err(|_| {
                        EmbedError::Malformed {
                            line: 1,
                            reason: format!("bad dimension header {line:?}"),
                        }
                    })?);
                    continue;
                }
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap().to_string();
            let values: Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
            let values = values.map_err(|e| EmbedError::Malformed {
                line: idx + 1,
                reason: e.to_string(),
            })?;
            if values.is_empty() {
                return Err(EmbedError::Malformed {
                    line: idx + 1,
                    reason: "no vector components".into(),
                });
            }
            match dimension {
                None => dimension = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(EmbedError::Malformed {
                        line: idx + 1,
                        reason: format!("expected {d} components, found {}", values.len()),
                    })
                }
                _ => {}
            }
            vectors.insert(token.to_lowercase(), values);
        }
        let dimension = dimension.ok_or(EmbedError::Malformed {
            line: 0,
            reason: "empty embedding file".into(),
        })?;
        Ok(EmbeddingTable { dimension, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn known_tokens(&self) -> usize {
        self.vectors.len()
    }

    /// Vector for a token: the stored entry, or the deterministic fallback.
    ///
    /// The fallback sums hashed vectors of the token's character 3- and
    /// 4-grams (with boundary markers) plus the whole token, then
    /// normalizes. Morphologically related tokens therefore land near each
    /// other while unrelated tokens stay near-orthogonal.
    pub fn get(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.vectors.get(token) {
            return v.clone();
        }
        let marked: Vec<char> = std::iter::once('<')
            .chain(token.chars())
            .chain(std::iter::once('>'))
            .collect();
        let mut v = vec![0.0; self.dimension];
        let mut add_gram = |gram: &[char]| {
            let s: String = gram.iter().collect();
            let mut state = fnv1a(s.as_bytes());
            for x in v.iter_mut() {
                // uniform in [-1, 1)
                *x += (splitmix64(&mut state) >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0;
            }
        };
        for n in [3usize, 4] {
            if marked.len() >= n {
                for gram in marked.windows(n) {
                    add_gram(gram);
                }
            }
        }
        add_gram(&marked);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

/// Arithmetic mean of the sentence's token vectors.
pub fn embed_sentence(u: &Utterance, table: &EmbeddingTable) -> Result<Vec<f64>, EmbedError> {
    if u.tokens.is_empty() {
        return Err(EmbedError::EmptyUtterance);
    }
    let d = table.dimension();
    let mut sum = vec![0.0; d];
    for t in &u.tokens {
        for (s, x) in sum.iter_mut().zip(table.get(t)) {
            *s += x;
        }
    }
    let n = u.tokens.len() as f64;
    for s in &mut sum {
        *s /= n;
    }
    Ok(sum)
}

/// Pair representation for the perceptrons: the Hadamard product of the two
/// sentence embeddings concatenated with their elementwise absolute
/// difference. Both blocks are symmetric in the inputs.
pub fn pair_vector(e1: &[f64], e2: &[f64]) -> Result<Vec<f64>, EmbedError> {
    if e1.len() != e2.len() {
        return Err(EmbedError::LengthMismatch(e1.len(), e2.len()));
    }
    let mut out = Vec::with_capacity(2 * e1.len());
    out.extend(e1.iter().zip(e2).map(|(a, b)| a * b));
    out.extend(e1.iter().zip(e2).map(|(a, b)| (a - b).abs()));
    Ok(out)
}
