//! Random forest regressor: CART trees grown on bootstrap samples with
//! variance-reduction splits over random feature subsets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Trees are stored as a flat arena but serialize as nested node records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "NestedNode", into = "NestedNode")]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NestedNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<NestedNode>,
        right: Box<NestedNode>,
    },
}

impl Tree {
    fn to_nested(&self, idx: usize) -> NestedNode {
        match &self.nodes[idx] {
            Node::Leaf { value } => NestedNode::Leaf { value: *value },
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => NestedNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(self.to_nested(*left)),
                right: Box::new(self.to_nested(*right)),
            },
        }
    }

    fn push_nested(nodes: &mut Vec<Node>, nested: &NestedNode) -> usize {
        match nested {
            NestedNode::Leaf { value } => {
                nodes.push(Node::Leaf { value: *value });
                nodes.len() - 1
            }
            NestedNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let idx = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 }); // placeholder
                let left_idx = Self::push_nested(nodes, left);
                let right_idx = Self::push_nested(nodes, right);
                nodes[idx] = Node::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left: left_idx,
                    right: right_idx,
                };
                idx
            }
        }
    }
}

impl From<Tree> for NestedNode {
    fn from(tree: Tree) -> Self {
        tree.to_nested(0)
    }
}

impl From<NestedNode> for Tree {
    fn from(nested: NestedNode) -> Self {
        let mut nodes = Vec::new();
        Tree::push_nested(&mut nodes, &nested);
        Tree { nodes }
    }
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub trees: usize,
    pub max_features: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_features: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<'a> TreeBuilder<'a> {
    fn leaf(&mut self, indices: &[usize]) -> usize {
        let value = indices.iter().map(|&i| self.y[i]).sum::<f64>() / indices.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn build(&mut self, indices: &[usize], rng: &mut ChaCha8Rng) -> usize {
        let n = indices.len();
        if n < 2 * self.min_leaf || n < 2 {
            return self.leaf(indices);
        }
        let first = self.y[indices[0]];
        if indices.iter().all(|&i| self.y[i] == first) {
            return self.leaf(indices);
        }

        let p = self.x[0].len();
        let mut feature_pool: Vec<usize> = (0..p).collect();
        feature_pool.shuffle(rng);
        feature_pool.truncate(self.max_features.min(p));

        let mut best: Option<BestSplit> = None;
        let mut order = indices.to_vec();
        for &feature in &feature_pool {
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));

            // Prefix sums over the sorted order let each candidate split be
            // scored as total squared error of the two children.
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            let total_sum: f64 = order.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();
            for split_at in 1..n {
                let yi = self.y[order[split_at - 1]];
                left_sum += yi;
                left_sq += yi * yi;
                if split_at < self.min_leaf || n - split_at < self.min_leaf {
                    continue;
                }
                let lo = self.x[order[split_at - 1]][feature];
                let hi = self.x[order[split_at]][feature];
                if lo == hi {
                    continue;
                }
                let nl = split_at as f64;
                let nr = (n - split_at) as f64;
                let right_sum = total_sum - left_sum;
                let right_sq = total_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl)
                    + (right_sq - right_sum * right_sum / nr);
                if best.as_ref().is_none_or(|b| sse < b.score) {
                    best = Some(BestSplit {
                        feature,
                        threshold: (lo + hi) / 2.0,
                        score: sse,
                    });
                }
            }
        }

        let Some(split) = best else {
            return self.leaf(indices);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= split.threshold);

        let node_idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
        let left_idx = self.build(&left, rng);
        let right_idx = self.build(&right, rng);
        self.nodes[node_idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_idx,
            right: right_idx,
        };
        node_idx
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[f64], params: &ForestParams, tree_index: usize) -> Tree {
    // Decorrelate per-tree streams with a splitmix-style seed mix.
    let seed = params
        .seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(tree_index as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.len();
    let indices: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut builder = TreeBuilder {
        x,
        y,
        max_features: params.max_features.max(1),
        min_leaf: params.min_leaf.max(1),
        nodes: Vec::new(),
    };
    let root = builder.build(&indices, &mut rng);
    debug_assert_eq!(root, 0);
    Tree {
        nodes: builder.nodes,
    }
}

pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Forest {
    let trees: Vec<Tree> = (0..params.trees)
        .into_par_iter()
        .map(|i| fit_tree(x, y, params, i))
        .collect();
    Forest { trees }
}
