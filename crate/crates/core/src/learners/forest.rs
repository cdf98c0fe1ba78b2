//! Bagged CART regression trees.
//!
//! Splits maximise variance reduction; leaves predict the mean target of their samples.
//! On 0/1 targets variance reduction is the Gini criterion and leaf means are class
//! fractions, so the same trees serve as the probability forest.
//!
//! Training rows are put into a canonical order (lexicographic on features, then target)
//! before bootstrapping, which makes a fitted forest independent of input row order.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::{self, Stream};
use crate::Matrix;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut k = 0usize;
        loop {
            let node = &self.nodes[k];
            if node.feature == LEAF {
                return node.value;
            }
            k = if x[node.feature as usize] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    /// Fits `n_trees` trees; tree `t` draws from sub-stream `t` of the forest seed, so the
    /// result does not depend on how many threads build it.
    pub fn fit(x: &Matrix, y: &[f64], n_trees: usize, params: TreeParams, seed: u64) -> Self {
        let (x, y) = canonical_order(x, y);
        let base = seed::derive(seed, Stream::Forest);
        let trees = (0..n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::child(base, t as u64));
                let n = y.len();
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                build_tree(&x, &y, sample, params, &mut rng)
            })
            .collect();
        Self { trees }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

fn canonical_order(x: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>) {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(y[a].total_cmp(&y[b]))
    });
    (x.select_rows(&order), order.iter().map(|&i| y[i]).collect())
}

struct Pending {
    node: usize,
    samples: Vec<usize>,
    depth: usize,
}

fn build_tree(x: &Matrix, y: &[f64], samples: Vec<usize>, params: TreeParams, rng: &mut seed::Rng) -> Tree {
    let d = x.ncols();
    let mut nodes = vec![leaf(mean_of(y, &samples))];
    let mut stack = vec![Pending {
        node: 0,
        samples,
        depth: 0,
    }];
    let mut pairs: Vec<(f64, f64)> = Vec::new();

    while let Some(Pending { node, samples, depth }) = stack.pop() {
        let n = samples.len();
        if n < 2 * params.min_leaf || params.max_depth.is_some_and(|m| depth >= m) {
            continue;
        }
        let first = y[samples[0]];
        if samples.iter().all(|&i| y[i] == first) {
            continue;
        }
        let total: f64 = samples.iter().map(|&i| y[i]).sum();
        let parent_score = total * total / n as f64;

        let mut best: Option<(usize, f64, f64)> = None; // feature, threshold, score
        for f in index::sample(rng, d, params.mtry.min(d)).into_iter() {
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (x.get(i, f), y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for p in 1..n {
                left_sum += pairs[p - 1].1;
                if p < params.min_leaf || n - p < params.min_leaf {
                    continue;
                }
                let (lo, hi) = (pairs[p - 1].0, pairs[p].0);
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / p as f64 + right_sum * right_sum / (n - p) as f64;
                if best.is_none_or(|(_, _, s)| score > s) {
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((f, threshold, score));
                }
            }
        }
        let Some((feature, threshold, score)) = best else {
            continue;
        };
        if score <= parent_score * (1.0 + 1e-12) + 1e-12 {
            continue;
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.into_iter().partition(|&i| x.get(i, feature) <= threshold);
        let l = nodes.len();
        nodes.push(leaf(mean_of(y, &left)));
        nodes.push(leaf(mean_of(y, &right)));
        nodes[node] = Node {
            feature: feature as u32,
            threshold,
            left: l as u32,
            right: (l + 1) as u32,
            value: nodes[node].value,
        };
        stack.push(Pending {
            node: l + 1,
            samples: right,
            depth: depth + 1,
        });
        stack.push(Pending {
            node: l,
            samples: left,
            depth: depth + 1,
        });
    }
    Tree { nodes }
}

fn leaf(value: f64) -> Node {
    Node {
        feature: LEAF,
        threshold: 0.0,
        left: LEAF,
        right: LEAF,
        value,
    }
}

fn mean_of(y: &[f64], samples: &[usize]) -> f64 {
    samples.iter().map(|&i| y[i]).sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mtry: usize) -> TreeParams {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            mtry,
        }
    }

    #[test]
    fn single_tree_separates_step() {
        let x = Matrix::from_vec(8, 1, (0..8).map(f64::from).collect()).unwrap();
        let y: Vec<f64> = (0..8).map(|i| if i < 4 { 0.0 } else { 10.0 }).collect();
        let mut rng = seed::rng(0);
        let tree = build_tree(&x, &y, (0..8).collect(), params(1), &mut rng);
        assert_eq!(tree.n_leaves(), 2);
        assert_eq!(tree.predict_row(&[3.4]), 0.0);
        assert_eq!(tree.predict_row(&[3.6]), 10.0);
    }

    #[test]
    fn depth_limit_respected() {
        let x = Matrix::from_vec(16, 1, (0..16).map(f64::from).collect()).unwrap();
        let y: Vec<f64> = (0..16).map(f64::from).collect();
        let p = TreeParams {
            max_depth: Some(1),
            ..params(1)
        };
        let tree = build_tree(&x, &y, (0..16).collect(), p, &mut seed::rng(0));
        assert_eq!(tree.n_leaves(), 2);
    }

    #[test]
    fn min_leaf_respected() {
        let x = Matrix::from_vec(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let y: Vec<f64> = (0..10).map(|i| if i == 0 { 100.0 } else { 0.0 }).collect();
        let p = TreeParams {
            min_leaf: 3,
            ..params(1)
        };
        let tree = build_tree(&x, &y, (0..10).collect(), p, &mut seed::rng(0));
        // the outlier cannot be isolated; it shares a leaf with at least two others
        assert!(tree.predict_row(&[0.0]) <= 100.0 / 3.0 + 1e-12);
    }
}
