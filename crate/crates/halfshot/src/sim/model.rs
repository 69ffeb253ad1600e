//! Training and scoring of the four-submodel ensemble.

use std::collections::HashMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::embed::{embed_sentence, pair_vector, EmbeddingTable};
use super::encode::{decode_output, encode_target, Scheme};
use super::features::{PairFeatures, FEATURE_COUNT};
use super::forest::{Forest, ForestConfig};
use super::gbt::{Gbt, GbtConfig};
use super::mlp::{Mlp, MlpConfig};
use super::sparse::{bow_idf_vector, IdfStats, SparseVec};
use crate::text::Utterance;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("label {0} outside [0, {1}]")]
    BadLabel(f64, f64),
    #[error("model expects embedding dimension {expected}, table has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model has not been trained")]
    Untrained,
}

/// A sentence pair with a similarity label in `[0, max_score]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: Utterance,
    pub b: Utterance,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Score ceiling M; interaction labels {0,1} map to {0, M}.
    pub max_score: u32,
    /// For two-valued corpora, oversample the minority label until it holds
    /// at least this fraction of the training rows. Same-intent pairs are a
    /// few percent of all pairs, and every submodel collapses toward the
    /// majority without some balance. `None` disables.
    pub rebalance: Option<f64>,
    pub mlp: MlpConfig,
    pub forest: ForestConfig,
    pub gbt: GbtConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_score: 5,
            rebalance: Some(0.25),
            mlp: MlpConfig::default(),
            forest: ForestConfig::default(),
            gbt: GbtConfig::default(),
        }
    }
}

pub const SUBMODEL_NAMES: [&str; 4] = [
    "binary-perceptron",
    "nclass-perceptron",
    "random-forest",
    "boosted-trees",
];

/// The trained ensemble: two perceptrons over embedding pair vectors, two
/// tree models over string/kernel features, plus the frozen IDF statistics
/// the features were computed with. Immutable once built; scoring is
/// read-only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityModel {
    max_score: u32,
    embedding_dim: usize,
    idf: IdfStats,
    binary: Mlp,
    nclass: Mlp,
    forest: Forest,
    gbt: Gbt,
    /// All training labels were identical; scores remain usable but the
    /// caller may want to keep collecting data.
    pub degenerate: bool,
    pub pair_count: usize,
    pub trained_at_unix: u64,
    pub config_digest: String,
}

fn digest_config(cfg: &TrainConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Train the ensemble on labeled pairs. IDF statistics come from
/// `documents` (one document per stored sentence); when empty, the distinct
/// sentences of the corpus serve as documents. Deterministic for a given
/// seed.
pub fn train(
    pairs: &[LabeledPair],
    documents: &[Utterance],
    table: &EmbeddingTable,
    config: &TrainConfig,
    seed: u64,
) -> Result<SimilarityModel, ModelError> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let m = config.max_score as f64;
    for p in pairs {
        if !(0.0..=m).contains(&p.score) || !p.score.is_finite() {
            return Err(ModelError::BadLabel(p.score, m));
        }
    }
    let degenerate = pairs.windows(2).all(|w| w[0].score == w[1].score);

    // training-row index per pair, with the minority label oversampled for
    // two-valued corpora
    let mut rows: Vec<usize> = (0..pairs.len()).collect();
    if let Some(target) = config.rebalance {
        let mut labels: Vec<u64> = pairs.iter().map(|p| p.score.to_bits()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() == 2 {
            let low = f64::from_bits(labels[0]);
            let n_low = pairs.iter().filter(|p| p.score == low).count();
            let (minority, m) = if 2 * n_low <= pairs.len() {
                (low, n_low)
            } else {
                (f64::from_bits(labels[1]), pairs.len() - n_low)
            };
            let t = pairs.len() as f64;
            let m_f = m as f64;
            if m > 0 && m_f / t < target {
                let k = (target * (t - m_f) / (m_f * (1.0 - target))).ceil() as usize;
                for (i, p) in pairs.iter().enumerate() {
                    if p.score == minority {
                        rows.extend(std::iter::repeat(i).take(k - 1));
                    }
                }
            }
        }
    }

    let mut own_documents = Vec::new();
    let documents = if documents.is_empty() {
        let mut seen = HashMap::new();
        for p in pairs {
            for u in [&p.a, &p.b] {
                seen.entry(u.joined()).or_insert_with(|| u.clone());
            }
        }
        own_documents.extend(seen.into_values());
        own_documents.sort_by(|a: &Utterance, b: &Utterance| a.raw.cmp(&b.raw));
        &own_documents
    } else {
        documents
    };
    let idf = IdfStats::from_documents(documents.iter());

    // per-pair features, then expanded over the (possibly oversampled) rows
    let mut bow_cache: HashMap<String, SparseVec> = HashMap::new();
    let mut unique_features = Vec::with_capacity(pairs.len());
    for p in pairs {
        let ka = p.a.joined();
        if !bow_cache.contains_key(&ka) {
            bow_cache.insert(ka.clone(), bow_idf_vector(&p.a, &idf));
        }
        let kb = p.b.joined();
        if !bow_cache.contains_key(&kb) {
            bow_cache.insert(kb.clone(), bow_idf_vector(&p.b, &idf));
        }
        unique_features.push(PairFeatures::compute_with_bow(
            &p.a,
            &p.b,
            &bow_cache[&ka],
            &bow_cache[&kb],
        ));
    }
    let mut columns = vec![Vec::with_capacity(rows.len()); FEATURE_COUNT];
    for &i in &rows {
        for (col, v) in columns.iter_mut().zip(unique_features[i].0) {
            col.push(v);
        }
    }
    let tree_targets: Vec<f64> = rows.iter().map(|&i| pairs[i].score / m).collect();

    // perceptron inputs
    let mut embed_cache: HashMap<String, Vec<f64>> = HashMap::new();
    let mut embed_of = |u: &Utterance| -> Vec<f64> {
        embed_cache
            .entry(u.joined())
            .or_insert_with(|| embed_sentence(u, table).expect("non-empty utterance"))
            .clone()
    };
    let unique_inputs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| pair_vector(&embed_of(&p.a), &embed_of(&p.b)).expect("equal dims"))
        .collect();
    let inputs: Vec<Vec<f64>> = rows.iter().map(|&i| unique_inputs[i].clone()).collect();
    let binary_targets: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            let t = encode_target(pairs[i].score, Scheme::Binary, config.max_score)
                .expect("in range")[0];
            vec![1.0 - t, t]
        })
        .collect();
    let nclass_targets: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            encode_target(pairs[i].score, Scheme::NClass, config.max_score).expect("in range")
        })
        .collect();

    let input_dim = 2 * table.dimension();
    let mut binary = Mlp::new(input_dim, &config.mlp.hidden, 2, seed ^ 0xb1);
    binary.train(&inputs, &binary_targets, &config.mlp, seed ^ 0xb2);
    let mut nclass = Mlp::new(
        input_dim,
        &config.mlp.hidden,
        config.max_score as usize + 1,
        seed ^ 0xc1,
    );
    nclass.train(&inputs, &nclass_targets, &config.mlp, seed ^ 0xc2);

    let forest = Forest::fit(&columns, &tree_targets, &config.forest, seed ^ 0xd1);
    let gbt = Gbt::fit(&columns, &tree_targets, &config.gbt, seed ^ 0xe1);

    Ok(SimilarityModel {
        max_score: config.max_score,
        embedding_dim: table.dimension(),
        idf,
        binary,
        nclass,
        forest,
        gbt,
        degenerate,
        pair_count: pairs.len(),
        trained_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config_digest: digest_config(config),
    })
}

/// Arithmetic mean of submodel scores, clamped to [0,1]. The ensemble
/// combination rule, kept separate so it can be checked against stub
/// submodels.
pub fn ensemble_mean(scores: &[f64]) -> f64 {
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    mean.clamp(0.0, 1.0)
}

impl SimilarityModel {
    pub fn max_score(&self) -> u32 {
        self.max_score
    }

    pub fn idf(&self) -> &IdfStats {
        &self.idf
    }

    fn check_table(&self, table: &EmbeddingTable) -> Result<(), ModelError> {
        if table.dimension() != self.embedding_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.embedding_dim,
                got: table.dimension(),
            });
        }
        Ok(())
    }

    /// The four normalized submodel scores in `SUBMODEL_NAMES` order, each
    /// in [0,1].
    pub fn submodel_scores(
        &self,
        a: &Utterance,
        b: &Utterance,
        table: &EmbeddingTable,
    ) -> Result<[f64; 4], ModelError> {
        self.check_table(table)?;
        let ea = embed_sentence(a, table).map_err(|_| ModelError::EmptyCorpus)?;
        let eb = embed_sentence(b, table).map_err(|_| ModelError::EmptyCorpus)?;
        let xa = bow_idf_vector(a, &self.idf);
        let xb = bow_idf_vector(b, &self.idf);
        Ok(self.submodel_scores_prepared(a, b, &ea, &eb, &xa, &xb))
    }

    fn submodel_scores_prepared(
        &self,
        a: &Utterance,
        b: &Utterance,
        ea: &[f64],
        eb: &[f64],
        xa: &SparseVec,
        xb: &SparseVec,
    ) -> [f64; 4] {
        let m = self.max_score as f64;
        let pv = pair_vector(ea, eb).expect("equal dims");
        let pb = self.binary.forward(&pv);
        let binary_score =
            decode_output(&[pb[1].clamp(0.0, 1.0)], Scheme::Binary, self.max_score)
                .expect("valid probability")
                / m;
        let pn = self.nclass.forward(&pv);
        let nclass_score = decode_output(&pn, Scheme::NClass, self.max_score)
            .unwrap_or_else(|_| {
                // renormalize tiny float drift before giving up
                let s: f64 = pn.iter().sum();
                pn.iter().enumerate().map(|(i, p)| i as f64 * p / s).sum()
            })
            / m;
        let f = PairFeatures::compute_with_bow(a, b, xa, xb);
        let forest_score = self.forest.predict(&f.0).clamp(0.0, 1.0);
        let gbt_score = self.gbt.predict(&f.0).clamp(0.0, 1.0);
        [
            binary_score.clamp(0.0, 1.0),
            nclass_score.clamp(0.0, 1.0),
            forest_score,
            gbt_score,
        ]
    }

    /// Ensemble similarity in [0,1]: the mean of the four submodel scores.
    pub fn score(
        &self,
        a: &Utterance,
        b: &Utterance,
        table: &EmbeddingTable,
    ) -> Result<f64, ModelError> {
        Ok(ensemble_mean(&self.submodel_scores(a, b, table)?))
    }
}

/// Scores one anchor sentence against many others, caching the anchor's
/// embedding and bag-of-words vector.
pub struct PairScorer<'a> {
    model: &'a SimilarityModel,
    table: &'a EmbeddingTable,
    anchor: Utterance,
    anchor_embed: Vec<f64>,
    anchor_bow: SparseVec,
}

impl<'a> PairScorer<'a> {
    pub fn new(
        model: &'a SimilarityModel,
        table: &'a EmbeddingTable,
        anchor: Utterance,
    ) -> Result<Self, ModelError> {
        model.check_table(table)?;
        let anchor_embed = embed_sentence(&anchor, table).map_err(|_| ModelError::EmptyCorpus)?;
        let anchor_bow = bow_idf_vector(&anchor, model.idf());
        Ok(PairScorer {
            model,
            table,
            anchor,
            anchor_embed,
            anchor_bow,
        })
    }

    pub fn score(&self, other: &Utterance) -> f64 {
        let eb = embed_sentence(other, self.table).expect("non-empty utterance");
        let xb = bow_idf_vector(other, self.model.idf());
        ensemble_mean(&self.model.submodel_scores_prepared(
            &self.anchor,
            other,
            &self.anchor_embed,
            &eb,
            &self.anchor_bow,
            &xb,
        ))
    }
}

/// Mean of the four submodel scores for the ensemble-mean identity checks.
pub fn score(model: &SimilarityModel, a: &Utterance, b: &Utterance, table: &EmbeddingTable) -> Result<f64, ModelError> {
    model.score(a, b, table)
}
