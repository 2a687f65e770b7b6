//! Depth-limited binary decision trees: greedy Gini splits for
//! classification on change labels, variance-reduction splits for regressing
//! continuous signals. Split search runs over midpoints of sorted unique
//! feature values; ties break deterministically toward the lowest feature
//! index and threshold.

use crate::error::{Error, Result};
use crate::netcore::Mat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Positive-class probability (classification) or mean (regression).
        prediction: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: usize,
    pub max_depth: Option<usize>,
    n_features: usize,
}

enum SplitScore {
    Gini,
    Variance,
}

struct Builder<'a> {
    x: &'a Mat,
    targets: &'a [f64],
    score: SplitScore,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<'a> Builder<'a> {
    fn impurity(&self, idx: &[usize]) -> f64 {
        let n = idx.len() as f64;
        match self.score {
            SplitScore::Gini => {
                let pos = idx.iter().filter(|&&i| self.targets[i] > 0.5).count() as f64;
                let p = pos / n;
                2.0 * p * (1.0 - p)
            }
            SplitScore::Variance => {
                let mean = idx.iter().map(|&i| self.targets[i]).sum::<f64>() / n;
                idx.iter()
                    .map(|&i| (self.targets[i] - mean) * (self.targets[i] - mean))
                    .sum::<f64>()
                    / n
            }
        }
    }

    fn best_split(&self, idx: &[usize]) -> Option<BestSplit> {
        let parent = self.impurity(idx);
        let n = idx.len() as f64;
        let mut best: Option<BestSplit> = None;
        for feature in 0..self.x.cols() {
            let mut values: Vec<f64> = idx.iter().map(|&i| self.x.get(i, feature)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for pair in values.windows(2) {
                let threshold = 0.5 * (pair[0] + pair[1]);
                let left: Vec<usize> = idx
                    .iter()
                    .copied()
                    .filter(|&i| self.x.get(i, feature) <= threshold)
                    .collect();
                if left.is_empty() || left.len() == idx.len() {
                    continue;
                }
                let right: Vec<usize> = idx
                    .iter()
                    .copied()
                    .filter(|&i| self.x.get(i, feature) > threshold)
                    .collect();
                let weighted = (left.len() as f64 * self.impurity(&left)
                    + right.len() as f64 * self.impurity(&right))
                    / n;
                let gain = parent - weighted;
                // Strictly-better keeps the first (lowest feature/threshold)
                // candidate on ties.
                if best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &[usize], depth: usize, max_depth: Option<usize>) -> usize {
        let leaf_value = {
            let n = idx.len() as f64;
            idx.iter().map(|&i| self.targets[i]).sum::<f64>() / n
        };
        let pure = self.impurity(idx) == 0.0;
        let at_cap = max_depth.is_some_and(|d| depth >= d);
        if pure || at_cap || idx.len() < 2 {
            self.nodes.push(Node::Leaf {
                prediction: leaf_value,
                count: idx.len(),
            });
            return self.nodes.len() - 1;
        }
        // Zero-gain splits are still taken (a parity pattern needs them to
        // become separable one level down); nodes with no candidate split
        // (constant features) become leaves.
        let Some(split) = self.best_split(idx) else {
            self.nodes.push(Node::Leaf {
                prediction: leaf_value,
                count: idx.len(),
            });
            return self.nodes.len() - 1;
        };
        let left_idx: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.x.get(i, split.feature) <= split.threshold)
            .collect();
        let right_idx: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.x.get(i, split.feature) > split.threshold)
            .collect();
        let left = self.build(&left_idx, depth + 1, max_depth);
        let right = self.build(&right_idx, depth + 1, max_depth);
        self.nodes.push(Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        });
        self.nodes.len() - 1
    }
}

fn fit(
    x: &Mat,
    targets: &[f64],
    max_depth: Option<usize>,
    score: SplitScore,
) -> Result<DecisionTree> {
    let n = x.rows();
    if n == 0 || targets.len() != n {
        return Err(Error::Shape("tree inputs disagree on n".into()));
    }
    if let Some(d) = max_depth {
        if d == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
    }
    let mut builder = Builder {
        x,
        targets,
        score,
        nodes: Vec::new(),
    };
    let idx: Vec<usize> = (0..n).collect();
    let root = builder.build(&idx, 0, max_depth);
    Ok(DecisionTree {
        nodes: builder.nodes,
        root,
        max_depth,
        n_features: x.cols(),
    })
}

/// Greedy Gini-impurity classification tree on binary labels. Single-class
/// input yields a single leaf.
pub fn fit_tree(x: &Mat, labels: &[u8], max_depth: usize) -> Result<DecisionTree> {
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    fit(x, &targets, Some(max_depth), SplitScore::Gini)
}

/// Variance-reduction regression tree; `None` depth grows until leaves are
/// pure or indivisible.
pub fn fit_regression_tree(x: &Mat, targets: &[f64], max_depth: Option<usize>) -> Result<DecisionTree> {
    fit(x, targets, max_depth, SplitScore::Variance)
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = self.root;
        loop {
            match &self.nodes[node] {
                Node::Leaf { prediction, .. } => return *prediction,
                Node::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Mat) -> Result<Vec<f64>> {
        if x.cols() != self.n_features {
            return Err(Error::Shape(format!(
                "tree fitted on {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    /// Thresholded class predictions; ties (probability exactly 0.5) go to 0.
    pub fn predict_class(&self, x: &Mat) -> Result<Vec<u8>> {
        Ok(self.predict(x)?.into_iter().map(|p| u8::from(p > 0.5)).collect())
    }

    pub fn depth(&self) -> usize {
        fn depth_of(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => {
                    1 + depth_of(nodes, *left).max(depth_of(nodes, *right))
                }
            }
        }
        depth_of(&self.nodes, self.root)
    }

    pub fn leaf_count_total(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { count, .. } => Some(*count),
                _ => None,
            })
            .sum()
    }
}
