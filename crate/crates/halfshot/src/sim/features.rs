//! The feature vector the tree submodels see for a sentence pair.

use serde::{Deserialize, Serialize};

use super::kernels::{kernel_features, KERNEL_FEATURE_COUNT};
use super::sparse::{bow_idf_vector, IdfStats, SparseVec};
use crate::text::{bleu_sym, levenshtein, ngram_overlap, NgramUnit, Utterance};

pub const DISTANCE_FEATURE_COUNT: usize = 8;
pub const FEATURE_COUNT: usize = DISTANCE_FEATURE_COUNT + KERNEL_FEATURE_COUNT;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "char_overlap_2",
    "char_overlap_3",
    "char_overlap_4",
    "word_overlap_1",
    "word_overlap_2",
    "word_overlap_3",
    "levenshtein_norm",
    "bleu_sym",
    "cosine",
    "manhattan",
    "euclidean",
    "pearson",
    "spearman",
    "kendall_tau",
    "sigmoid",
    "rbf",
    "laplacian",
];

/// Seventeen values: eight string-distance features followed by nine kernel
/// features over the IDF-weighted bag-of-words vectors. Every entry is
/// finite and invariant under swapping the two sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures(pub [f64; FEATURE_COUNT]);

impl PairFeatures {
    pub fn compute(a: &Utterance, b: &Utterance, idf: &IdfStats) -> Self {
        let xa = bow_idf_vector(a, idf);
        let xb = bow_idf_vector(b, idf);
        Self::compute_with_bow(a, b, &xa, &xb)
    }

    /// Variant taking precomputed bag-of-words vectors, for callers that
    /// score one sentence against many.
    pub fn compute_with_bow(a: &Utterance, b: &Utterance, xa: &SparseVec, xb: &SparseVec) -> Self {
        let ja = a.joined();
        let jb = b.joined();
        let max_chars = ja.chars().count().max(jb.chars().count()).max(1);
        let lev = levenshtein(&ja, &jb) as f64 / max_chars as f64;
        let mut f = [0.0; FEATURE_COUNT];
        f[0] = ngram_overlap(a, b, 2, NgramUnit::Char);
        f[1] = ngram_overlap(a, b, 3, NgramUnit::Char);
        f[2] = ngram_overlap(a, b, 4, NgramUnit::Char);
        f[3] = ngram_overlap(a, b, 1, NgramUnit::Word);
        f[4] = ngram_overlap(a, b, 2, NgramUnit::Word);
        f[5] = ngram_overlap(a, b, 3, NgramUnit::Word);
        f[6] = lev;
        f[7] = bleu_sym(a, b);
        f[DISTANCE_FEATURE_COUNT..].copy_from_slice(&kernel_features(xa, xb));
        PairFeatures(f)
    }
}
