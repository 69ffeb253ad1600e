//! Gradient-boosted regression trees with squared loss: each round fits a
//! shallow tree to the current residuals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, RegressionTree, SortedRows, TreeConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 4,
            min_leaf: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gbt {
    base: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
}

impl Gbt {
    pub fn fit(columns: &[Vec<f64>], targets: &[f64], cfg: &GbtConfig, seed: u64) -> Self {
        let n = targets.len();
        assert!(n > 0);
        let base = targets.iter().sum::<f64>() / n as f64;
        let tree_cfg = TreeConfig {
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf,
            features_per_node: None,
        };
        // all rounds share the same rows, so presort once
        let sorted = SortedRows::new(columns, (0..n as u32).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b75);
        let mut prediction = vec![base; n];
        let mut residual = vec![0.0; n];
        let mut trees = Vec::with_capacity(cfg.rounds);
        for _ in 0..cfg.rounds {
            for i in 0..n {
                residual[i] = targets[i] - prediction[i];
            }
            let tree = build_tree(columns, &residual, &sorted, &tree_cfg, &mut rng);
            for i in 0..n {
                let x: Vec<f64> = columns.iter().map(|c| c[i]).collect();
                prediction[i] += cfg.learning_rate * tree.predict(&x);
            }
            trees.push(tree);
        }
        Gbt {
            base,
            learning_rate: cfg.learning_rate,
            trees,
        }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.base
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict(features))
                    .sum::<f64>()
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }
}
