//! Binary regression tree with squared-error splitting.
//!
//! Trees are grown level by level over presorted feature columns: one pass
//! per (level, feature) finds the best split of every active node at once.
//! Presorting is done once per row set, so boosting reuses it across rounds.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: u16,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if features[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features considered per node; `None` means all.
    pub features_per_node: Option<usize>,
}

/// Row set for one tree: indices into the column arrays, with multiplicity
/// (bootstrap samples repeat rows), plus per-feature orderings of the
/// positions in `rows` by feature value.
pub struct SortedRows {
    pub rows: Vec<u32>,
    sorted: Vec<Vec<u32>>,
}

impl SortedRows {
    pub fn new(columns: &[Vec<f64>], rows: Vec<u32>) -> Self {
        let sorted = columns
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..rows.len() as u32).collect();
                order.sort_by(|&a, &b| {
                    col[rows[a as usize] as usize]
                        .partial_cmp(&col[rows[b as usize] as usize])
                        .unwrap()
                });
                order
            })
            .collect();
        SortedRows { rows, sorted }
    }
}

struct LevelNode {
    tree_idx: usize,
    count: usize,
    sum: f64,
    mask: u32,
}

struct BestSplit {
    gain: f64,
    feature: u16,
    threshold: f64,
}

/// Grow a tree on `targets[rows]` from the given columns. Deterministic for
/// a given rng state; feature subsampling draws per node in level order.
pub fn build_tree(
    columns: &[Vec<f64>],
    targets: &[f64],
    sorted_rows: &SortedRows,
    cfg: &TreeConfig,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let rows = &sorted_rows.rows;
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let n_features = columns.len();
    let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
    // node_of[pos] = level-local id of the active node holding this position
    let mut node_of: Vec<u32> = vec![0; rows.len()];
    const SETTLED: u32 = u32::MAX;

    let feature_ids: Vec<u16> = (0..n_features as u16).collect();
    let root_sum: f64 = rows.iter().map(|&r| targets[r as usize]).sum();
    let sample_mask = |rng: &mut ChaCha8Rng| -> u32 {
        match cfg.features_per_node {
            None => u32::MAX,
            Some(k) if k >= n_features => u32::MAX,
            Some(k) => {
                let mut ids = feature_ids.clone();
                ids.partial_shuffle(rng, k)
                    .0
                    .iter()
                    .fold(0u32, |m, &f| m | (1 << f))
            }
        }
    };
    let mut level: Vec<LevelNode> = vec![LevelNode {
        tree_idx: 0,
        count: rows.len(),
        sum: root_sum,
        mask: sample_mask(rng),
    }];

    for _depth in 0..cfg.max_depth {
        if level.is_empty() {
            break;
        }
        let mut best: Vec<Option<BestSplit>> = (0..level.len()).map(|_| None).collect();
        let mut left_cnt = vec![0usize; level.len()];
        let mut left_sum = vec![0.0f64; level.len()];
        let mut prev_val = vec![f64::NAN; level.len()];
        for f in 0..n_features {
            left_cnt.iter_mut().for_each(|c| *c = 0);
            left_sum.iter_mut().for_each(|s| *s = 0.0);
            prev_val.iter_mut().for_each(|v| *v = f64::NAN);
            let col = &columns[f];
            for &si in &sorted_rows.sorted[f] {
                let nd = node_of[si as usize];
                if nd == SETTLED {
                    continue;
                }
                let nd = nd as usize;
                if level[nd].mask & (1 << f) == 0 {
                    continue;
                }
                let row = rows[si as usize] as usize;
                let v = col[row];
                let pv = prev_val[nd];
                if !pv.is_nan() && v > pv {
                    let nl = left_cnt[nd];
                    let nr = level[nd].count - nl;
                    if nl >= cfg.min_leaf && nr >= cfg.min_leaf {
                        let sl = left_sum[nd];
                        let sr = level[nd].sum - sl;
                        let gain = sl * sl / nl as f64 + sr * sr / nr as f64
                            - level[nd].sum * level[nd].sum / level[nd].count as f64;
                        if gain > 1e-12 && best[nd].as_ref().map_or(true, |b| gain > b.gain) {
                            best[nd] = Some(BestSplit {
                                gain,
                                feature: f as u16,
                                threshold: 0.5 * (pv + v),
                            });
                        }
                    }
                }
                left_cnt[nd] += 1;
                left_sum[nd] += targets[row];
                prev_val[nd] = v;
            }
        }

        // materialize splits and reassign positions
        let mut next_level: Vec<LevelNode> = Vec::new();
        let mut child_of: Vec<Option<(u32, u32)>> = Vec::with_capacity(level.len());
        for (nd, node) in level.iter().enumerate() {
            match &best[nd] {
                Some(split) => {
                    let left = nodes.len() as u32;
                    let right = left + 1;
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes[node.tree_idx] = TreeNode::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left,
                        right,
                    };
                    let lid = next_level.len() as u32;
                    next_level.push(LevelNode {
                        tree_idx: left as usize,
                        count: 0,
                        sum: 0.0,
                        mask: sample_mask(rng),
                    });
                    next_level.push(LevelNode {
                        tree_idx: right as usize,
                        count: 0,
                        sum: 0.0,
                        mask: sample_mask(rng),
                    });
                    child_of.push(Some((lid, lid + 1)));
                }
                None => {
                    nodes[node.tree_idx] = TreeNode::Leaf {
                        value: node.sum / node.count as f64,
                    };
                    child_of.push(None);
                }
            }
        }
        for (pos, nd) in node_of.iter_mut().enumerate() {
            if *nd == SETTLED {
                continue;
            }
            let old = *nd as usize;
            match (&best[old], child_of[old]) {
                (Some(split), Some((lid, rid))) => {
                    let row = rows[pos] as usize;
                    let child = if columns[split.feature as usize][row] <= split.threshold {
                        lid
                    } else {
                        rid
                    };
                    let c = &mut next_level[child as usize];
                    c.count += 1;
                    c.sum += targets[row];
                    *nd = child;
                }
                _ => *nd = SETTLED,
            }
        }
        level = next_level;
    }

    // anything still active at max depth becomes a leaf
    for node in &level {
        nodes[node.tree_idx] = TreeNode::Leaf {
            value: node.sum / node.count as f64,
        };
    }
    RegressionTree { nodes }
}
