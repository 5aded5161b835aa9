//! Regression tree for second-order gradient boosting: exact greedy splits
//! over presorted feature columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GbdtConfig;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Best split of one column: threshold is the midpoint between adjacent
/// distinct values, ties break toward the smallest threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub threshold: f64,
    pub gain: f64,
    /// Samples (in sorted order) going left.
    pub left_count: usize,
}

fn gain_term(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Scan a column in presorted order. `sorted` holds sample ids ordered by
/// feature value; `values` gives each sample's value in that column.
fn scan_sorted(
    sorted: &[u32],
    values: impl Fn(u32) -> f64,
    gradients: &[f64],
    hessians: &[f64],
    lambda: f64,
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    let n = sorted.len();
    if n < 2 * min_samples_leaf {
        return None;
    }
    let (mut g_total, mut h_total) = (0.0, 0.0);
    for &i in sorted {
        g_total += gradients[i as usize];
        h_total += hessians[i as usize];
    }
    let parent = gain_term(g_total, h_total, lambda);
    let (mut g_left, mut h_left) = (0.0, 0.0);
    let mut best: Option<SplitCandidate> = None;
    for pos in 0..n - 1 {
        let i = sorted[pos];
        g_left += gradients[i as usize];
        h_left += hessians[i as usize];
        let v = values(i);
        let v_next = values(sorted[pos + 1]);
        if v == v_next {
            continue;
        }
        let left_count = pos + 1;
        if left_count < min_samples_leaf || n - left_count < min_samples_leaf {
            continue;
        }
        let gain = gain_term(g_left, h_left, lambda)
            + gain_term(g_total - g_left, h_total - h_left, lambda)
            - parent;
        if gain > 0.0 && best.map(|b| gain > b.gain).unwrap_or(true) {
            best = Some(SplitCandidate {
                threshold: (v + v_next) / 2.0,
                gain,
                left_count,
            });
        }
    }
    best
}

/// Exact greedy best split of an unsorted feature column. Returns `None`
/// when no admissible split has positive gain.
pub fn find_best_split(
    gradients: &[f64],
    hessians: &[f64],
    feature_column: &[f64],
    config: &GbdtConfig,
) -> Option<(f64, f64)> {
    assert_eq!(gradients.len(), feature_column.len());
    let mut sorted: Vec<u32> = (0..feature_column.len() as u32).collect();
    sorted.sort_by(|&a, &b| {
        feature_column[a as usize]
            .partial_cmp(&feature_column[b as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    scan_sorted(
        &sorted,
        |i| feature_column[i as usize],
        gradients,
        hessians,
        config.lambda_l2,
        config.min_samples_leaf,
    )
    .map(|c| (c.threshold, c.gain))
}

/// Per-node state: for every candidate feature the node's sample ids in
/// that feature's sort order. Partitioning preserves order, so children
/// never re-sort.
struct NodeTask {
    sorted_per_feature: Vec<Vec<u32>>,
    depth: usize,
}

pub struct TreeBuilder<'a> {
    pub features: &'a Matrix,
    pub gradients: &'a [f64],
    pub hessians: &'a [f64],
    pub config: &'a GbdtConfig,
    /// Candidate feature indices for this tree (column subsampling).
    pub feature_ids: &'a [usize],
}

impl<'a> TreeBuilder<'a> {
    pub fn build(&self) -> Tree {
        let n = self.features.rows;
        let sorted_per_feature: Vec<Vec<u32>> = self
            .feature_ids
            .par_iter()
            .map(|&f| {
                let mut ids: Vec<u32> = (0..n as u32).collect();
                ids.sort_by(|&a, &b| {
                    self.features
                        .get(a as usize, f)
                        .partial_cmp(&self.features.get(b as usize, f))
                        .unwrap()
                        .then(a.cmp(&b))
                });
                ids
            })
            .collect();
        let mut nodes = Vec::new();
        self.grow(
            NodeTask {
                sorted_per_feature,
                depth: 0,
            },
            &mut nodes,
        );
        Tree { nodes }
    }

    fn leaf_value(&self, samples: &[u32]) -> f64 {
        let (mut g, mut h) = (0.0, 0.0);
        for &i in samples {
            g += self.gradients[i as usize];
            h += self.hessians[i as usize];
        }
        -g / (h + self.config.lambda_l2) * self.config.learning_rate
    }

    fn grow(&self, task: NodeTask, nodes: &mut Vec<Node>) -> usize {
        let samples = &task.sorted_per_feature[0];
        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf {
                value: self.leaf_value(samples),
            });
            nodes.len() - 1
        };
        if task.depth >= self.config.max_depth
            || samples.len() < 2 * self.config.min_samples_leaf
        {
            return make_leaf(nodes);
        }
        // Deterministic reduction: best candidates are gathered per feature
        // then reduced in feature order (gain desc, feature asc).
        let candidates: Vec<Option<SplitCandidate>> = task
            .sorted_per_feature
            .par_iter()
            .enumerate()
            .map(|(fi, sorted)| {
                let f = self.feature_ids[fi];
                scan_sorted(
                    sorted,
                    |i| self.features.get(i as usize, f),
                    self.gradients,
                    self.hessians,
                    self.config.lambda_l2,
                    self.config.min_samples_leaf,
                )
            })
            .collect();
        let mut best: Option<(usize, SplitCandidate)> = None;
        for (fi, cand) in candidates.into_iter().enumerate() {
            if let Some(c) = cand {
                if best.as_ref().map(|(_, b)| c.gain > b.gain).unwrap_or(true) {
                    best = Some((fi, c));
                }
            }
        }
        let Some((best_fi, cand)) = best else {
            return make_leaf(nodes);
        };
        let feature = self.feature_ids[best_fi];
        let go_left = |i: u32| self.features.get(i as usize, feature) <= cand.threshold;
        let mut left_sorted = Vec::with_capacity(task.sorted_per_feature.len());
        let mut right_sorted = Vec::with_capacity(task.sorted_per_feature.len());
        for sorted in &task.sorted_per_feature {
            let mut l = Vec::with_capacity(cand.left_count);
            let mut r = Vec::with_capacity(sorted.len() - cand.left_count);
            for &i in sorted {
                if go_left(i) {
                    l.push(i);
                } else {
                    r.push(i);
                }
            }
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let idx = nodes.len();
        nodes.push(Node::Split {
            feature,
            threshold: cand.threshold,
            left: 0,
            right: 0,
        });
        let left = self.grow(
            NodeTask {
                sorted_per_feature: left_sorted,
                depth: task.depth + 1,
            },
            nodes,
        );
        let right = self.grow(
            NodeTask {
                sorted_per_feature: right_sorted,
                depth: task.depth + 1,
            },
            nodes,
        );
        if let Node::Split {
            left: l, right: r, ..
        } = &mut nodes[idx]
        {
            *l = left;
            *r = right;
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(min_leaf: usize, lambda: f64) -> GbdtConfig {
        GbdtConfig {
            min_samples_leaf: min_leaf,
            lambda_l2: lambda,
            ..GbdtConfig::default()
        }
    }

    #[test]
    fn constant_column_no_split() {
        let g = [1.0, -1.0, 1.0, -1.0];
        let h = [1.0; 4];
        let col = [3.0; 4];
        assert_eq!(find_best_split(&g, &h, &col, &config(1, 0.0)), None);
    }

    #[test]
    fn four_point_split_brute_forced() {
        // Candidates 1.5, 2.5, 3.5; gain is maximal at 2.5 where the
        // gradient signs separate.
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        let col = [1.0, 2.0, 3.0, 4.0];
        let (threshold, gain) = find_best_split(&g, &h, &col, &config(1, 0.0)).unwrap();
        assert_eq!(threshold, 2.5);
        assert!(gain > 0.0);
    }

    #[test]
    fn equal_gain_prefers_smaller_threshold() {
        // Symmetric gradients: splits at 1.5 and 2.5 tie.
        let g = [-1.0, 1.0, -1.0];
        let h = [1.0; 3];
        let col = [1.0, 2.0, 3.0];
        let (threshold, _) = find_best_split(&g, &h, &col, &config(1, 0.5)).unwrap();
        assert_eq!(threshold, 1.5);
    }

    #[test]
    fn admissibility_requires_min_leaf_both_sides() {
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        let col = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(find_best_split(&g, &h, &col, &config(3, 0.0)), None);
    }
}
