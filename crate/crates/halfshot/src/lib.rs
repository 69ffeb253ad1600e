//! Adaptive intent and pattern learning for instructable assistants.
//!
//! The library learns user intents online from interaction feedback and
//! recognizes known intents expressed in never-seen surface forms
//! ("half-shot" learning). It is organized in layers:
//!
//! - [`text`]: tokenization and raw string-comparison metrics
//! - [`pattern`]: sentence templates with argument slots, matching, and
//!   candidate enumeration
//! - [`sim`]: the ensemble semantic-similarity model (two perceptrons,
//!   a random forest, gradient-boosted trees) and its feature pipeline
//! - [`engine`]: the online learner tying memories, similarity, and
//!   feedback together
//! - [`grammar`] / [`simulate`]: a sentence-generating user grammar and
//!   the simulated-interaction evaluation harness
//! - [`store`]: versioned snapshots of engine state and trained models

pub mod engine;
pub mod grammar;
pub mod pattern;
pub mod sim;
pub mod simulate;
pub mod store;
pub mod text;

pub use pattern::{ArgumentBinding, Pattern};
pub use sim::{EmbeddingTable, SimilarityModel, TrainConfig};
pub use text::Utterance;
