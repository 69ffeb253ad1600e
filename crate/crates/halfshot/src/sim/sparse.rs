//! IDF statistics over the sentence memory and sparse bag-of-words vectors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::text::Utterance;

/// Sparse vector over a fixed vocabulary-indexed space. Entries are sorted
/// by index and hold only nonzero values; every other coordinate is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            v[i as usize] = x;
        }
        v
    }
}

/// Document frequencies over a memory of sentences, one document per stored
/// sentence. `idf(w) = ln(N / df(w))`; words never seen get df = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdfStats {
    n_documents: usize,
    vocab: HashMap<String, u32>,
    doc_freq: Vec<u32>,
}

impl IdfStats {
    pub fn from_documents<'a, I>(documents: I) -> Self
    where
        I: IntoIterator<Item = &'a Utterance>,
    {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut doc_freq: Vec<u32> = Vec::new();
        let mut n_documents = 0;
        let mut seen: Vec<u32> = Vec::new();
        for doc in documents {
            n_documents += 1;
            seen.clear();
            for t in &doc.tokens {
                let id = *vocab.entry(t.clone()).or_insert_with(|| {
                    doc_freq.push(0);
                    (doc_freq.len() - 1) as u32
                });
                if !seen.contains(&id) {
                    seen.push(id);
                    doc_freq[id as usize] += 1;
                }
            }
        }
        IdfStats {
            n_documents,
            vocab,
            doc_freq,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> f64 {
        let df = self
            .token_id(token)
            .map(|id| self.doc_freq[id as usize])
            .unwrap_or(1)
            .max(1);
        ((self.n_documents.max(1)) as f64 / df as f64).ln()
    }
}

/// Bag-of-words sentence vector weighted by IDF: the entry for word `w` is
/// `count(w in u) * idf(w) / len(u)`. Out-of-vocabulary tokens have no
/// coordinate to land in and are dropped (their df defaults to 1 only for
/// `idf` lookups).
pub fn bow_idf_vector(u: &Utterance, idf: &IdfStats) -> SparseVec {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for t in &u.tokens {
        if let Some(id) = idf.token_id(t) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    let len = u.tokens.len().max(1) as f64;
    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(id, c)| {
            let df = idf.doc_freq[id as usize].max(1);
            let w = (idf.n_documents.max(1) as f64 / df as f64).ln();
            (id, c as f64 * w / len)
        })
        .filter(|&(_, x)| x != 0.0)
        .collect();
    entries.sort_unstable_by_key(|&(i, _)| i);
    SparseVec {
        dim: idf.vocab_size(),
        entries,
    }
}
