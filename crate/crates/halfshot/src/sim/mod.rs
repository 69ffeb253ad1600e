//! The ensemble semantic-similarity model.
//!
//! Two perceptrons score sentence pairs from averaged word embeddings; a
//! random forest and gradient-boosted trees score them from string-distance
//! and kernel features over IDF-weighted bag-of-words vectors. The model
//! prediction is the mean of the four submodel scores, normalized to [0,1].

mod embed;
mod encode;
mod features;
mod forest;
mod gbt;
mod kernels;
mod mlp;
mod model;
mod sparse;
mod tree;
pub mod sts;

pub use embed::{embed_sentence, pair_vector, EmbeddingTable};
pub use encode::{decode_output, encode_target, EncodeError, Scheme};
pub use features::{PairFeatures, FEATURE_COUNT, FEATURE_NAMES};
pub use forest::{Forest, ForestConfig};
pub use gbt::{Gbt, GbtConfig};
pub use kernels::{kernel_features, KERNEL_FEATURE_COUNT};
pub use mlp::{Mlp, MlpConfig};
pub use model::{
    ensemble_mean, score, train, LabeledPair, ModelError, PairScorer, SimilarityModel,
    TrainConfig, SUBMODEL_NAMES,
};
pub use sparse::{bow_idf_vector, IdfStats, SparseVec};
pub use tree::RegressionTree;
