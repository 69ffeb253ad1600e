//! Random forest regressor: bootstrapped trees with per-node feature
//! subsampling, averaged at prediction time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, RegressionTree, SortedRows, TreeConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            max_depth: 8,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
}

impl Forest {
    /// Fit on column-major features. Each tree sees a bootstrap sample of
    /// the rows and √p features per split node.
    pub fn fit(columns: &[Vec<f64>], targets: &[f64], cfg: &ForestConfig, seed: u64) -> Self {
        let n = targets.len();
        assert!(n > 0);
        let p = columns.len();
        let per_node = (p as f64).sqrt().round().max(1.0) as usize;
        let tree_cfg = TreeConfig {
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf,
            features_per_node: Some(per_node.min(p)),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf0e5);
        let trees = (0..cfg.n_trees)
            .map(|_| {
                let rows: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n as u32)).collect();
                let sorted = SortedRows::new(columns, rows);
                build_tree(columns, targets, &sorted, &tree_cfg, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        sum / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
